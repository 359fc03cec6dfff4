#include "msct/patchcraft.hpp"

#include <algorithm>
#include <string>

namespace msct {

void PatchCraftConfig::validate(int width, int n_angles) const {
    if (patch_len < 1 || patch_len % 2 == 0) throw ConfigError("patch_len must be odd and positive");
    if (patch_len >= width)
        throw ConfigError("patch_len " + std::to_string(patch_len) + " must be smaller than width " +
                          std::to_string(width));
    if (n_neighbors < 1) throw ConfigError("n_neighbors must be >= 1");
    if (angle_window < 0) throw ConfigError("angle_window must be >= 0");
    if (offsets.empty()) throw ConfigError("need at least one tiling offset");
    for (int o : offsets) {
        if (o < 0 || o >= patch_len)
            throw ConfigError("offset " + std::to_string(o) + " outside [0, patch_len)");
    }
    if (n_angles < 1) throw ConfigError("band image has no angles");
    // candidates per tile: at least one angle times all positions
    if (width - patch_len + 1 < n_neighbors && n_angles == 1)
        throw ConfigError("fewer candidate patches than n_neighbors");
}

std::vector<Tile> patch_tiles(int width, int patch_len, int offset) {
    std::vector<Tile> tiles;
    if (offset > 0) {
        // boundary patch anchored at 0 owns the cells the regular grid skips
        tiles.push_back(Tile{0, 0, std::min(offset, width)});
    }
    int s = offset;
    while (s + patch_len <= width) {
        tiles.push_back(Tile{s, s, s + patch_len});
        s += patch_len;
    }
    if (s < width) {
        // tail patch anchored flush with the right edge
        tiles.push_back(Tile{width - patch_len, s, width});
    }
    return tiles;
}

namespace {

struct Cand {
    double d;
    int a, p;
};

inline bool better(const Cand& x, const Cand& y) {
    if (x.d != y.d) return x.d < y.d;
    if (x.a != y.a) return x.a < y.a;
    return x.p < y.p;
}

}  // namespace

PatchFrames patch_craft_frames(const std::vector<double>& band, int width, int n_angles,
                               int target_angle, const PatchCraftConfig& cfg) {
    cfg.validate(width, n_angles);
    if (band.size() != static_cast<std::size_t>(width) * n_angles)
        throw DataError("band image size does not match width x n_angles");
    if (target_angle < 0 || target_angle >= n_angles)
        throw ConfigError("target angle " + std::to_string(target_angle) + " outside [0, " +
                          std::to_string(n_angles) + ")");

    const int P = cfg.patch_len;
    const int N = cfg.n_neighbors;
    const int a_lo = std::max(0, target_angle - cfg.angle_window);
    const int a_hi = std::min(n_angles - 1, target_angle + cfg.angle_window);
    const long n_cand = static_cast<long>(a_hi - a_lo + 1) * (width - P + 1);
    if (n_cand < N) throw ConfigError("fewer candidate patches than n_neighbors");

    const double* tgt = band.data() + static_cast<std::size_t>(target_angle) * width;

    PatchFrames out;
    out.n_offsets = static_cast<int>(cfg.offsets.size());
    out.n_neighbors = N;
    out.width = width;
    out.frames.assign(static_cast<std::size_t>(out.n_offsets) * N * width, 0.0);

    std::vector<Cand> best(static_cast<std::size_t>(N));
    for (int oi = 0; oi < out.n_offsets; ++oi) {
        for (const Tile& tile : patch_tiles(width, P, cfg.offsets[static_cast<std::size_t>(oi)])) {
            const double* tp = tgt + tile.anchor;
            int found = 0;
            for (int a = a_lo; a <= a_hi; ++a) {
                const double* row = band.data() + static_cast<std::size_t>(a) * width;
                for (int p = 0; p + P <= width; ++p) {
                    double d = 0.0;
                    for (int j = 0; j < P; ++j) {
                        double e = row[p + j] - tp[j];
                        d += e * e;
                    }
                    Cand c{d, a, p};
                    if (found < N) {
                        int i = found++;
                        while (i > 0 && better(c, best[static_cast<std::size_t>(i - 1)])) {
                            best[static_cast<std::size_t>(i)] = best[static_cast<std::size_t>(i - 1)];
                            --i;
                        }
                        best[static_cast<std::size_t>(i)] = c;
                    } else if (better(c, best[static_cast<std::size_t>(N - 1)])) {
                        int i = N - 1;
                        while (i > 0 && better(c, best[static_cast<std::size_t>(i - 1)])) {
                            best[static_cast<std::size_t>(i)] = best[static_cast<std::size_t>(i - 1)];
                            --i;
                        }
                        best[static_cast<std::size_t>(i)] = c;
                    }
                }
            }
            for (int n = 0; n < N; ++n) {
                const Cand& c = best[static_cast<std::size_t>(n)];
                const double* src = band.data() + static_cast<std::size_t>(c.a) * width + c.p;
                double* dst = out.frames.data() + (static_cast<std::size_t>(oi) * N + n) * width;
                for (int w = tile.w0; w < tile.w1; ++w) dst[w] = src[w - tile.anchor];
            }
        }
    }

    out.distance.assign(static_cast<std::size_t>(width), 0.0);
    const double inv = 1.0 / (static_cast<double>(out.n_offsets) * N);
    for (int oi = 0; oi < out.n_offsets; ++oi) {
        for (int n = 0; n < N; ++n) {
            const double* f = out.frames.data() + (static_cast<std::size_t>(oi) * N + n) * width;
            for (int w = 0; w < width; ++w) {
                double e = f[w] - tgt[w];
                out.distance[static_cast<std::size_t>(w)] += e * e * inv;
            }
        }
    }
    return out;
}

}  // namespace msct
