#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <numbers>

#include "doctest.h"
#include "msct/phantom.hpp"

using namespace msct;

namespace {
VoxelPhantom block_phantom() {
    // 4x4x1 grid, 2x2 aluminium block centred on the rotation axis
    VoxelPhantom p;
    p.nx = p.ny = 4;
    p.nz = 1;
    p.voxel_size = 1e-4;
    p.volume1.assign(p.n_voxels(), 0);
    p.volume2.assign(p.n_voxels(), 0);
    for (int y = 1; y <= 2; ++y)
        for (int x = 1; x <= 2; ++x) p.volume1[p.index(x, y, 0)] = 1;
    return p;
}
}  // namespace

TEST_CASE("procedural phantom is deterministic, disjoint, non-empty") {
    VoxelPhantom a = generate_procedural_phantom(42, 48, 48, 8, 1e-4);
    VoxelPhantom b = generate_procedural_phantom(42, 48, 48, 8, 1e-4);
    CHECK(a.volume1 == b.volume1);
    CHECK(a.volume2 == b.volume2);

    VoxelPhantom c = generate_procedural_phantom(43, 48, 48, 8, 1e-4);
    CHECK(a.volume1 != c.volume1);

    std::size_t n1 = 0, n2 = 0;
    for (std::size_t i = 0; i < a.n_voxels(); ++i) {
        CHECK(a.volume1[i] + a.volume2[i] <= 1);  // disjoint
        n1 += a.volume1[i];
        n2 += a.volume2[i];
    }
    CHECK(n1 > 0);
    CHECK(n2 > 0);
    CHECK(n1 > n2);  // host body dominates the insert
}

TEST_CASE("axis-aligned projections of a centred block") {
    VoxelPhantom p = block_phantom();
    for (double angle : {0.0, std::numbers::pi / 2}) {
        PathLengthProjection proj = longitudinal_projection(p, 0, angle, 4, 1e-4);
        CHECK(proj.l1[0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(proj.l1[1] == doctest::Approx(2e-4).epsilon(1e-9));
        CHECK(proj.l1[2] == doctest::Approx(2e-4).epsilon(1e-9));
        CHECK(proj.l1[3] == doctest::Approx(0.0).epsilon(1e-12));
        for (double v : proj.l2) CHECK(v == 0.0);
    }
}

TEST_CASE("diagonal ray crosses the block diagonal") {
    VoxelPhantom p = block_phantom();
    PathLengthProjection proj = longitudinal_projection(p, 0, std::numbers::pi / 4, 4, 1e-4);
    // centre pixels sit at s = +-0.5e-4; chord of the square |x|,|y| <= 1e-4
    // at 45 degrees and offset |s| = 0.5e-4 has length 2*(sqrt(2)*1e-4 - |s|)
    double expect = 2.0 * (std::sqrt(2.0) * 1e-4 - 0.5e-4);
    CHECK(proj.l1[1] == doctest::Approx(expect).epsilon(1e-9));
    CHECK(proj.l1[2] == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("opposite angles mirror the projection") {
    VoxelPhantom p = generate_procedural_phantom(7, 32, 32, 8, 1e-4);
    int width = 48;
    PathLengthProjection fwd = longitudinal_projection(p, 2, 0.3, width, 0.8e-4);
    PathLengthProjection bwd = longitudinal_projection(p, 2, 0.3 + std::numbers::pi, width, 0.8e-4);
    for (int i = 0; i < width; ++i) {
        CHECK(bwd.l1[i] == doctest::Approx(fwd.l1[width - 1 - i]).epsilon(1e-9));
        CHECK(bwd.l2[i] == doctest::Approx(fwd.l2[width - 1 - i]).epsilon(1e-9));
    }
}

TEST_CASE("axis-aligned mass equals voxel area exactly") {
    VoxelPhantom p = generate_procedural_phantom(11, 32, 32, 8, 1e-4);
    std::size_t filled = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) filled += p.volume1[p.index(x, y, 1)];
    double area = static_cast<double>(filled) * 1e-4 * 1e-4;

    PathLengthProjection proj = longitudinal_projection(p, 1, 0.0, 32, 1e-4);
    double mass = 0;
    for (double v : proj.l1) mass += v * 1e-4;
    CHECK(mass == doctest::Approx(area).epsilon(1e-9));
}

TEST_CASE("oblique mass approximates the area") {
    VoxelPhantom p = generate_procedural_phantom(11, 48, 48, 8, 1e-4);
    std::size_t filled = 0;
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) filled += p.volume1[p.index(x, y, 2)];
    double area = static_cast<double>(filled) * 1e-8;

    PathLengthProjection proj = longitudinal_projection(p, 2, 0.7, 160, 0.5e-4);
    double mass = 0;
    for (double v : proj.l1) mass += v * 0.5e-4;
    CHECK(mass == doctest::Approx(area).epsilon(0.05));
}

TEST_CASE("rays outside the grid return zero") {
    VoxelPhantom p = block_phantom();
    PathLengthProjection proj = longitudinal_projection(p, 0, 0.1, 64, 1e-3);
    CHECK(proj.l1.front() == 0.0);
    CHECK(proj.l1.back() == 0.0);
}

TEST_CASE("volume import/export round trip and validation") {
    VoxelPhantom p = generate_procedural_phantom(3, 16, 16, 8, 1e-4);
    export_voxel_volume("tmp_vol.bin", p.volume1);
    auto back = import_voxel_volume("tmp_vol.bin", 16, 16, 8);
    CHECK(back == p.volume1);
    CHECK_THROWS_AS(import_voxel_volume("tmp_vol.bin", 16, 16, 9), DataError);
    {
        std::FILE* f = std::fopen("tmp_vol_bad.bin", "wb");
        std::vector<std::uint8_t> junk(16 * 16 * 8, 2);
        std::fwrite(junk.data(), 1, junk.size(), f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(import_voxel_volume("tmp_vol_bad.bin", 16, 16, 8), DataError);
    std::remove("tmp_vol.bin");
    std::remove("tmp_vol_bad.bin");
}

TEST_CASE("phantom validation") {
    VoxelPhantom p = block_phantom();
    p.volume2.pop_back();
    CHECK_THROWS_AS(p.validate(), DataError);
    VoxelPhantom q = block_phantom();
    q.voxel_size = 0;
    CHECK_THROWS_AS(q.validate(), ConfigError);
}

TEST_CASE("slice index bounds") {
    VoxelPhantom p = block_phantom();
    CHECK_THROWS_AS(longitudinal_projection(p, 5, 0.0, 4, 1e-4), ConfigError);
}
