#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "msct/detector.hpp"

using namespace msct;

namespace {

MaterialTable half_absorbing_luag() {
    // mu such that 1 - exp(-mu * 2 mm) = 0.5 at every energy
    MaterialTable t;
    t.name = "luag";
    t.energy = {1.0, 500.0};
    double mu = std::log(2.0) / 2e-3;
    t.mu = {mu, mu};
    return t;
}

DetectorConfig quiet_config() {
    DetectorConfig cfg;
    cfg.dark_current = 0.0;
    cfg.prnu_sigma = 0.0;
    cfg.readout_sigma_sq = 0.0;
    return cfg;
}

}  // namespace

TEST_CASE("expected gray value matches the hand-computed chain") {
    MaterialTable luag = half_absorbing_luag();
    DetectorConfig cfg;
    BinnedCounts counts{{100.0}, {1e6}};
    // 1e6 * 0.5 absorbed, * 0.1 MeV * 25000 / 4000 optical, * 0.82 qe, / 0.46 e/DN
    CHECK(expected_gray_value(counts, cfg, luag) == doctest::Approx(557065.2173913043).epsilon(1e-12));
    CHECK(scintillator_absorbed_fraction(100.0, cfg, luag) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("chain is linear in the counts") {
    MaterialTable luag = half_absorbing_luag();
    DetectorConfig cfg;
    BinnedCounts one{{40.0, 80.0, 120.0}, {1e4, 2e4, 3e4}};
    BinnedCounts two{{40.0, 80.0, 120.0}, {2e4, 4e4, 6e4}};
    CHECK(expected_gray_value(two, cfg, luag) ==
          doctest::Approx(2.0 * expected_gray_value(one, cfg, luag)).epsilon(1e-12));
}

TEST_CASE("zero input with all noise off quantizes to zero") {
    MaterialTable luag = half_absorbing_luag();
    DetectorConfig cfg = quiet_config();
    BinnedCounts counts{{100.0}, {0.0}};
    CHECK(apply_noise(counts, cfg, luag, 1) == 0);
    CHECK(apply_noise({}, cfg, luag, 99) == 0);
}

TEST_CASE("quantization rounds half to even and clamps") {
    DetectorConfig cfg;
    cfg.electrons_per_dn = 0.5;
    CHECK(quantize_dn(0.25, cfg) == 0);   // 0.5 DN -> even 0
    CHECK(quantize_dn(0.75, cfg) == 2);   // 1.5 DN -> even 2
    CHECK(quantize_dn(1.25, cfg) == 2);   // 2.5 DN -> even 2
    CHECK(quantize_dn(-3.0, cfg) == 0);
    CHECK(quantize_dn(1e9, cfg) == 65535);
    cfg.bit_depth = 12;
    CHECK(quantize_dn(1e9, cfg) == 4095);
}

TEST_CASE("apply_noise is deterministic in the seed") {
    MaterialTable luag = half_absorbing_luag();
    DetectorConfig cfg;
    BinnedCounts counts{{60.0, 100.0}, {5e4, 5e4}};
    CHECK(apply_noise(counts, cfg, luag, 12345) == apply_noise(counts, cfg, luag, 12345));
    int diffs = 0;
    for (std::uint64_t s = 0; s < 8; ++s)
        diffs += apply_noise(counts, cfg, luag, s) != apply_noise(counts, cfg, luag, s + 100);
    CHECK(diffs > 0);
}

TEST_CASE("noisy mean tracks expected value plus dark offset") {
    MaterialTable luag = half_absorbing_luag();
    DetectorConfig cfg;
    BinnedCounts counts{{100.0}, {1e4}};
    double gt = expected_gray_value(counts, cfg, luag);
    double predicted_mean = gt + cfg.dark_current / cfg.electrons_per_dn;

    const int n = 3000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        double v = apply_noise(counts, cfg, luag, 1000 + i);
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(predicted_mean).epsilon(0.01));

    // compound Poisson variance: absorbed lambda 5000, 0.625 optical each
    double lam = 5e3, w = 100.0 * 1e-3 * 25000.0 / 4000.0;
    double var_e = cfg.qe * cfg.qe * (lam * w + lam * w * w);
    double mean_e = lam * w * cfg.qe + cfg.dark_current;
    var_e += mean_e * mean_e * cfg.prnu_sigma * cfg.prnu_sigma;
    var_e += cfg.dark_current * cfg.dark_current + cfg.readout_sigma_sq;
    double var_dn = var_e / (cfg.electrons_per_dn * cfg.electrons_per_dn);
    CHECK(var == doctest::Approx(var_dn).epsilon(0.15));
}

TEST_CASE("flat field over the bundled spectrum is positive with real dynamic range") {
    EnergyGrid grid{22.9, 0.05, 7540};
    EnergySpectrum src = load_spectrum(MSCT_DATA_DIR "/bm18_spectrum_approx.txt", grid);
    MaterialTable si = load_material_table(MSCT_DATA_DIR "/si.txt", "si");
    MaterialTable luag = load_material_table(MSCT_DATA_DIR "/luag.txt", "luag");
    PrismGeometry g = preset_geometry("bm18-sim");
    g.n_rows = 64;
    g.delta = calibrate_delta(g, 32.565, 50.0);
    DetectorConfig cfg;

    std::vector<double> flat = flat_field(src, g, cfg, si, luag);
    REQUIRE(flat.size() == 64);
    double lo = 1e300, hi = 0;
    for (double v : flat) {
        CHECK(v > 0.0);
        CHECK(std::isfinite(v));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(hi / lo > 10.0);
    // training rows for the desk config need usable signal
    for (int r = 1; r <= 50; ++r) CHECK(flat[r] > 500.0);
}

TEST_CASE("simulate_dataset is deterministic and schedule independent") {
    VoxelPhantom phantom = generate_procedural_phantom(7, 32, 32, 8, 1e-4);
    EnergyGrid grid{22.9, 0.3, 1256};
    EnergySpectrum src = load_spectrum(MSCT_DATA_DIR "/bm18_spectrum_approx.txt", grid);
    MaterialTable si = load_material_table(MSCT_DATA_DIR "/si.txt", "si");
    MaterialTable al = load_material_table(MSCT_DATA_DIR "/al.txt", "al");
    MaterialTable sio2 = load_material_table(MSCT_DATA_DIR "/sio2.txt", "sio2");
    MaterialTable luag = load_material_table(MSCT_DATA_DIR "/luag.txt", "luag");

    SimulationArgs args;
    args.phantom = &phantom;
    args.slices = {1, 2};
    args.geom = preset_geometry("bm18-sim");
    args.geom.n_rows = 16;
    args.geom.delta = calibrate_delta(args.geom, 32.565, 50.0);
    args.source = &src;
    args.si = &si;
    args.mat1 = &al;
    args.mat2 = &sio2;
    args.luag = &luag;
    args.width = 32;
    args.pixel_pitch = 1.5e-4;
    args.n_angles = 4;
    args.seed = 99;
    args.threads = 1;

    auto a = simulate_dataset(args);
    args.threads = 4;
    auto b = simulate_dataset(args);
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].gt.f32 == b[i].gt.f32);
        CHECK(a[i].noisy.u16 == b[i].noisy.u16);
    }

    args.seed = 100;
    auto c = simulate_dataset(args);
    CHECK(a[0].noisy.u16 != c[0].noisy.u16);

    // object attenuates: averaged over rows, the centre pixel sits below flat
    const SinogramStack& gt = a[0].gt;
    double centre = 0, flat_sum = 0;
    for (int r = 0; r < gt.n_rows; ++r) {
        centre += gt.at(16, r, 0);
        flat_sum += gt.flat_field[r];
    }
    CHECK(centre < flat_sum);
    CHECK(centre > 0.0);

    // metadata sanity
    CHECK(gt.row_e_mean[1] > gt.row_e_mean[10]);
    CHECK(gt.flat_field.size() == 16);
    for (auto v : a[0].noisy.u16) CHECK(v <= 65535);
}
