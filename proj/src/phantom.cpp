#include "msct/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace msct {

namespace {

// Deterministic uniform stream (independent of stdlib distribution details).
struct UniformStream {
    std::uint64_t state;
    explicit UniformStream(std::uint64_t seed) : state(seed) {}
    double next() {
        state = splitmix64(state);
        return static_cast<double>(state >> 11) * 0x1.0p-53;
    }
    double next(double lo, double hi) { return lo + (hi - lo) * next(); }
};

struct Ellipsoid {
    double cx, cy, cz, ax, ay, az;
    bool contains(double x, double y, double z) const {
        double u = (x - cx) / ax, v = (y - cy) / ay, w = (z - cz) / az;
        return u * u + v * v + w * w <= 1.0;
    }
};

struct HalfSpace {
    double nx, ny, nz, offset;  // n . p <= offset
    bool contains(double x, double y, double z) const {
        return nx * x + ny * y + nz * z <= offset;
    }
};

}  // namespace

void VoxelPhantom::validate() const {
    if (nx < 1 || ny < 1 || nz < 1) throw ConfigError("phantom dims must be positive");
    if (voxel_size <= 0.0) throw ConfigError("voxel size must be positive");
    if (volume1.size() != n_voxels() || volume2.size() != n_voxels()) {
        throw DataError("phantom mask size does not match dims");
    }
    for (std::size_t i = 0; i < volume1.size(); ++i) {
        if (volume1[i] && volume2[i]) throw DataError("phantom masks overlap");
    }
}

VoxelPhantom generate_procedural_phantom(std::uint64_t seed, int nx, int ny, int nz,
                                         double voxel_size) {
    if (nx < 8 || ny < 8 || nz < 8) throw ConfigError("procedural phantom needs dims >= 8 per axis");
    if (voxel_size <= 0.0) throw ConfigError("voxel size must be positive");

    UniformStream rng(hash_combine(seed, 0x9d7f3a2e1b4c5d6eULL));
    const double dx = nx, dy = ny, dz = nz;

    std::vector<Ellipsoid> blobs;
    double ccx = 0, ccy = 0, ccz = 0;
    for (int k = 0; k < 6; ++k) {
        Ellipsoid e{rng.next(0.38, 0.62) * dx, rng.next(0.38, 0.62) * dy, rng.next(0.38, 0.62) * dz,
                    rng.next(0.16, 0.28) * dx, rng.next(0.16, 0.28) * dy, rng.next(0.16, 0.28) * dz};
        ccx += e.cx / 6.0;
        ccy += e.cy / 6.0;
        ccz += e.cz / 6.0;
        blobs.push_back(e);
    }
    std::vector<Ellipsoid> pores;
    for (int k = 0; k < 15; ++k) {
        double r = rng.next(0.02, 0.045) * std::min({dx, dy, dz});
        pores.push_back({rng.next(0.25, 0.75) * dx, rng.next(0.25, 0.75) * dy,
                         rng.next(0.25, 0.75) * dz, r, r, r});
    }

    // Polyhedral insert: centered cuboid cut by three random planes, never
    // closer than 1.5 voxels to the centre so the insert cannot vanish.
    double hx = std::max(1.6, rng.next(0.05, 0.09) * dx);
    double hy = std::max(1.6, rng.next(0.05, 0.09) * dy);
    double hz = std::max(1.6, rng.next(0.05, 0.09) * dz);
    std::vector<HalfSpace> cuts;
    for (int k = 0; k < 3; ++k) {
        double vx = rng.next(-1.0, 1.0), vy = rng.next(-1.0, 1.0), vz = rng.next(-1.0, 1.0);
        double norm = std::sqrt(vx * vx + vy * vy + vz * vz);
        if (norm < 1e-6) {
            vx = 1.0;
            vy = vz = 0.0;
            norm = 1.0;
        }
        vx /= norm;
        vy /= norm;
        vz /= norm;
        double off = vx * ccx + vy * ccy + vz * ccz + rng.next(1.5, 0.5 * std::min({hx, hy, hz}) + 1.6);
        cuts.push_back({vx, vy, vz, off});
    }

    VoxelPhantom p;
    p.nx = nx;
    p.ny = ny;
    p.nz = nz;
    p.voxel_size = voxel_size;
    p.volume1.assign(p.n_voxels(), 0);
    p.volume2.assign(p.n_voxels(), 0);

    for (int z = 0; z < nz; ++z) {
        for (int y = 0; y < ny; ++y) {
            for (int x = 0; x < nx; ++x) {
                double px = x + 0.5, py = y + 0.5, pz = z + 0.5;
                bool in1 = false;
                for (const auto& b : blobs) {
                    if (b.contains(px, py, pz)) {
                        in1 = true;
                        break;
                    }
                }
                if (in1) {
                    for (const auto& pore : pores) {
                        if (pore.contains(px, py, pz)) {
                            in1 = false;
                            break;
                        }
                    }
                }
                bool in2 = std::abs(px - ccx) <= hx && std::abs(py - ccy) <= hy &&
                           std::abs(pz - ccz) <= hz;
                if (in2) {
                    for (const auto& c : cuts) {
                        if (!c.contains(px, py, pz)) {
                            in2 = false;
                            break;
                        }
                    }
                }
                std::size_t idx = p.index(x, y, z);
                p.volume2[idx] = in2 ? 1 : 0;
                p.volume1[idx] = (in1 && !in2) ? 1 : 0;
            }
        }
    }

    bool any1 = false, any2 = false;
    for (std::size_t i = 0; i < p.n_voxels(); ++i) {
        any1 |= p.volume1[i] != 0;
        any2 |= p.volume2[i] != 0;
    }
    if (!any1 || !any2) throw NumericError("procedural phantom degenerated to an empty mask");
    return p;
}

std::vector<std::uint8_t> import_voxel_volume(const std::string& path, int nx, int ny, int nz) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DataError("cannot open voxel volume: " + path);
    auto size = static_cast<std::size_t>(f.tellg());
    std::size_t expect = static_cast<std::size_t>(nx) * ny * nz;
    if (size != expect) {
        throw DataError(path + ": voxel file size " + std::to_string(size) + " != nx*ny*nz = " +
                        std::to_string(expect));
    }
    f.seekg(0);
    std::vector<std::uint8_t> grid(expect);
    f.read(reinterpret_cast<char*>(grid.data()), static_cast<std::streamsize>(expect));
    if (!f) throw DataError(path + ": short read");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] > 1) {
            throw DataError(path + ": voxel byte at index " + std::to_string(i) + " is not 0/1");
        }
    }
    return grid;
}

void export_voxel_volume(const std::string& path, const std::vector<std::uint8_t>& mask) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write voxel volume: " + path);
    f.write(reinterpret_cast<const char*>(mask.data()), static_cast<std::streamsize>(mask.size()));
    if (!f) throw DataError("short write: " + path);
}

PathLengthProjection longitudinal_projection(const VoxelPhantom& phantom, int slice_z,
                                             double angle, int width, double pixel_pitch) {
    if (slice_z < 0 || slice_z >= phantom.nz) {
        throw ConfigError("slice_z " + std::to_string(slice_z) + " outside [0, " +
                        std::to_string(phantom.nz) + ")");
    }
    if (width < 1 || pixel_pitch <= 0.0) throw ConfigError("invalid projection raster");

    PathLengthProjection proj;
    proj.width = width;
    proj.angle = angle;
    proj.l1.assign(static_cast<std::size_t>(width), 0.0);
    proj.l2.assign(static_cast<std::size_t>(width), 0.0);

    const double v = phantom.voxel_size;
    const double x0 = -0.5 * phantom.nx * v;  // grid origin; rotation axis at (0,0)
    const double y0 = -0.5 * phantom.ny * v;
    const double dirx = -std::sin(angle), diry = std::cos(angle);
    const double ux = std::cos(angle), uy = std::sin(angle);
    const std::uint8_t* m1 = phantom.volume1.data() + phantom.index(0, 0, slice_z);
    const std::uint8_t* m2 = phantom.volume2.data() + phantom.index(0, 0, slice_z);
    const double inf = std::numeric_limits<double>::infinity();

    for (int pix = 0; pix < width; ++pix) {
        const double s = (pix - 0.5 * (width - 1)) * pixel_pitch;
        const double px = s * ux, py = s * uy;  // point on ray closest to axis

        // clip to the slice bounding box
        double t_in = -inf, t_out = inf;
        if (dirx != 0.0) {
            double ta = (x0 - px) / dirx, tb = (x0 + phantom.nx * v - px) / dirx;
            t_in = std::max(t_in, std::min(ta, tb));
            t_out = std::min(t_out, std::max(ta, tb));
        } else if (px < x0 || px >= x0 + phantom.nx * v) {
            continue;
        }
        if (diry != 0.0) {
            double ta = (y0 - py) / diry, tb = (y0 + phantom.ny * v - py) / diry;
            t_in = std::max(t_in, std::min(ta, tb));
            t_out = std::min(t_out, std::max(ta, tb));
        } else if (py < y0 || py >= y0 + phantom.ny * v) {
            continue;
        }
        if (t_in >= t_out) continue;

        double t = t_in;
        double cx = px + t * dirx, cy = py + t * diry;
        int i = std::clamp(static_cast<int>(std::floor((cx - x0) / v)), 0, phantom.nx - 1);
        int j = std::clamp(static_cast<int>(std::floor((cy - y0) / v)), 0, phantom.ny - 1);
        const int step_i = dirx > 0.0 ? 1 : -1;
        const int step_j = diry > 0.0 ? 1 : -1;
        const double t_delta_x = dirx != 0.0 ? v / std::abs(dirx) : inf;
        const double t_delta_y = diry != 0.0 ? v / std::abs(diry) : inf;
        double t_max_x = inf, t_max_y = inf;
        if (dirx != 0.0) {
            double next = x0 + (i + (step_i > 0 ? 1 : 0)) * v;
            t_max_x = (next - px) / dirx;
        }
        if (diry != 0.0) {
            double next = y0 + (j + (step_j > 0 ? 1 : 0)) * v;
            t_max_y = (next - py) / diry;
        }

        double acc1 = 0.0, acc2 = 0.0;
        while (t < t_out) {
            double t_next = std::min({t_max_x, t_max_y, t_out});
            double seg = t_next - t;
            if (seg > 0.0) {
                std::size_t idx = static_cast<std::size_t>(i) +
                                  static_cast<std::size_t>(phantom.nx) * static_cast<std::size_t>(j);
                if (m1[idx]) acc1 += seg;
                if (m2[idx]) acc2 += seg;
            }
            if (t_max_x <= t_max_y) {
                i += step_i;
                t = t_max_x;
                t_max_x += t_delta_x;
                if (i < 0 || i >= phantom.nx) break;
            } else {
                j += step_j;
                t = t_max_y;
                t_max_y += t_delta_y;
                if (j < 0 || j >= phantom.ny) break;
            }
        }
        proj.l1[static_cast<std::size_t>(pix)] = acc1;
        proj.l2[static_cast<std::size_t>(pix)] = acc2;
    }
    return proj;
}

}  // namespace msct
