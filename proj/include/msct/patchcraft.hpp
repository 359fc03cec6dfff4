#pragma once

#include <vector>

#include "msct/common.hpp"

namespace msct {

struct PatchCraftConfig {
    int patch_len = 7;              // odd, < width
    int n_neighbors = 5;            // ranks kept per offset
    int angle_window = 4;           // +/- adjacent angles searched, clamped at the ends
    std::vector<int> offsets{0, 3};  // tiling start offsets, each in [0, patch_len)

    void validate(int width, int n_angles) const;
};

/*** One tile of the target line: the patch is anchored at `anchor` and only
 * [w0, w1) of it is written into the frame, so a frame covers every pixel
 * exactly once even with a nonzero offset. */
struct Tile {
    int anchor, w0, w1;
};

std::vector<Tile> patch_tiles(int width, int patch_len, int offset);

struct PatchFrames {
    int n_offsets = 0, n_neighbors = 0, width = 0;
    std::vector<double> frames;    // [offset][neighbor][width]
    std::vector<double> distance;  // [width], mean squared deviation from the target line

    double at(int o, int n, int w) const {
        return frames[(static_cast<std::size_t>(o) * n_neighbors + n) * width + w];
    }
};

/*** Nearest-neighbor frame synthesis for one (band, angle) line. `band` is an
 * angle-major band image [n_angles x width]. For every offset and neighbor
 * rank, each tile is replaced by its rank-th closest patch (L2 distance) drawn
 * from the surrounding angles; ties break on (distance, angle, position). The
 * target patch itself is a candidate, so rank 1 reproduces the target line. */
PatchFrames patch_craft_frames(const std::vector<double>& band, int width, int n_angles,
                               int target_angle, const PatchCraftConfig& cfg);

}  // namespace msct
