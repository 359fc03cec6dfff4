#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msct/common.hpp"

namespace msct {

/*** Paired voxel masks: volume1 (host body, default Al) and volume2 (enclosed
 * insert, default SiO2), disjoint by construction. Layout row-major,
 * x fastest. */
struct VoxelPhantom {
    int nx = 0, ny = 0, nz = 0;
    double voxel_size = 0.0;  // m
    std::vector<std::uint8_t> volume1;
    std::vector<std::uint8_t> volume2;
    std::string material1 = "al";
    std::string material2 = "sio2";

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(nx) * (static_cast<std::size_t>(y) +
                                               static_cast<std::size_t>(ny) * static_cast<std::size_t>(z));
    }
    std::size_t n_voxels() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    void validate() const;
};

/*** Per-pixel exact intersection lengths for one slice and angle. */
struct PathLengthProjection {
    int width = 0;
    double angle = 0.0;  // rad
    std::vector<double> l1;  // m
    std::vector<double> l2;  // m
};

/*** Seeded procedural phantom: a blobby ellipsoid-union body with pore noise
 * (volume1) and a polyhedral insert strictly inside it (volume2). */
VoxelPhantom generate_procedural_phantom(std::uint64_t seed, int nx, int ny, int nz,
                                         double voxel_size);

std::vector<std::uint8_t> import_voxel_volume(const std::string& path, int nx, int ny, int nz);
void export_voxel_volume(const std::string& path, const std::vector<std::uint8_t>& mask);

/*** Parallel-beam projection of one z-slice. Rays lie in the slice plane with
 * direction (-sin a, cos a); detector coordinate s = x cos a + y sin a with
 * s = 0 on the rotation axis at the grid centre and pixel p at
 * s = (p - (width-1)/2) * pixel_pitch. Exact incremental voxel traversal. */
PathLengthProjection longitudinal_projection(const VoxelPhantom& phantom, int slice_z,
                                             double angle, int width, double pixel_pitch);

}  // namespace msct
