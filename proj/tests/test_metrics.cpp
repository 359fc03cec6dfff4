#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "msct/common.hpp"
#include "msct/metrics.hpp"

using namespace msct;

namespace {

// bit-identical twin of tools/metrics_oracle.py
std::vector<double> quadrant(int side) {
    std::vector<double> img(static_cast<std::size_t>(side) * side);
    int half = side / 2;
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            img[static_cast<std::size_t>(y) * side + x] =
                y < half ? (x < half ? 0.25 : 0.75) : (x < half ? 0.5 : 1.0);
    return img;
}

std::vector<double> oracle_noisy(const std::vector<double>& clean, std::uint64_t seed, double amp) {
    std::vector<double> out(clean);
    std::uint64_t state = seed;
    for (double& v : out) {
        state = splitmix64(state);
        v += (static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5) * amp;
    }
    return out;
}

NormalizedStack stack_from_band(const std::vector<double>& img, int width, int angles) {
    NormalizedStack n;
    n.width = width;
    n.n_rows = 1;
    n.n_angles = angles;
    n.flat_field = {1.0};
    n.data = img;
    return n;
}

}  // namespace

TEST_CASE("psnr basics") {
    std::vector<double> x(100, 0.5);
    CHECK_FALSE(psnr(x, x, 1.0).has_value());  // saturation marker

    std::vector<double> y(100, 0.5);
    for (auto& v : y) v += 1.0;  // MSE = peak^2
    CHECK(*psnr(y, x, 1.0) == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(psnr(x, std::vector<double>(99, 0.0), 1.0), DataError);
    CHECK_THROWS_AS(psnr(x, x, 0.0), ConfigError);
}

TEST_CASE("psnr of gaussian noise matches the closed form at 512^2") {
    std::mt19937_64 rng(11);
    double sigma = 0.05;
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<double> ref(512 * 512, 0.5), x(512 * 512);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = ref[i] + noise(rng);
    CHECK(*psnr(x, ref, 1.0) == doctest::Approx(20.0 * std::log10(1.0 / sigma)).epsilon(0.1 / 26.0));
}

TEST_CASE("psnr strictly decreases with noise level") {
    std::vector<double> ref = quadrant(64);
    double prev = 1e9;
    for (double sigma : {0.01, 0.02, 0.05, 0.1}) {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> noise(0.0, sigma);
        std::vector<double> x(ref);
        for (auto& v : x) v += noise(rng);
        double p = *psnr(x, ref, 1.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("frozen oracle instance: psnr, ssim, ms-ssim, nrmse") {
    std::vector<double> clean = quadrant(128);
    std::vector<double> noisy = oracle_noisy(clean, 2024, 0.1);

    CHECK(*psnr(noisy, clean, 1.0) == doctest::Approx(30.82073643).epsilon(1e-8));
    CHECK(ssim(noisy, clean, 128, 128) == doctest::Approx(0.5863915393).epsilon(1e-7));
    CHECK(ms_ssim(noisy, clean, 128, 128, 3) == doctest::Approx(0.8916200428).epsilon(1e-7));
    CHECK(ms_ssim(noisy, clean, 128, 128, 4) == doctest::Approx(0.9198918179).epsilon(1e-7));
    CHECK(nrmse(noisy, clean) == doctest::Approx(0.0383620595).epsilon(1e-7));
}

TEST_CASE("ssim identity, symmetry, and sensitivity to offsets") {
    std::vector<double> x = oracle_noisy(quadrant(64), 7, 0.2);
    CHECK(ssim(x, x, 64, 64) == 1.0);

    std::vector<double> y = oracle_noisy(quadrant(64), 8, 0.2);
    CHECK(ssim(x, y, 64, 64) == doctest::Approx(ssim(y, x, 64, 64)).epsilon(1e-9));

    double prev = 0.0;
    for (double b : {0.2, 0.05, 0.01, 0.001}) {
        std::vector<double> shifted(x);
        for (auto& v : shifted) v += b;
        double s = ssim(shifted, x, 64, 64);
        CHECK(s < 1.0);
        CHECK(s > prev);  // approaches 1 as b -> 0
        prev = s;
    }
    CHECK(prev > 0.999);
}

TEST_CASE("ms-ssim identity and pyramid size guard") {
    std::vector<double> x = oracle_noisy(quadrant(96), 3, 0.1);
    CHECK(ms_ssim(x, x, 96, 96, 3) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_WITH_AS(ms_ssim(x, x, 96, 96, 5), doctest::Contains("pyramid"), DataError);
    CHECK_THROWS_AS(ms_ssim(x, x, 96, 96, 0), ConfigError);
}

TEST_CASE("nrmse basics") {
    std::vector<double> ref = quadrant(32);
    CHECK(nrmse(ref, ref) == 0.0);

    std::vector<double> shifted(ref);
    for (auto& v : shifted) v += 0.15;  // range of ref is 0.75
    CHECK(nrmse(shifted, ref) == doctest::Approx(0.15 / 0.75).epsilon(1e-12));

    // scale consistency
    std::vector<double> x = oracle_noisy(ref, 21, 0.1);
    std::vector<double> ax(x), aref(ref);
    for (auto& v : ax) v *= 3.7;
    for (auto& v : aref) v *= 3.7;
    CHECK(nrmse(ax, aref) == doctest::Approx(nrmse(x, ref)).epsilon(1e-12));

    std::vector<double> constant(ref.size(), 2.0);
    CHECK_THROWS_AS(nrmse(x, constant), DataError);
    // mean normalization variant stays defined there
    CHECK(nrmse(x, constant, true) > 0.0);
}

TEST_CASE("roi snr definition and composite") {
    int w = 32, h = 32;
    std::vector<double> img(static_cast<std::size_t>(w) * h, 0.0);
    // ROI A: mean 10, std 2 (half 8, half 12)
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 8; ++x) img[static_cast<std::size_t>(y) * w + x] = (x % 2 == 0) ? 8.0 : 12.0;
    // ROI B: constant
    for (int y = 10; y < 14; ++y)
        for (int x = 10; x < 18; ++x) img[static_cast<std::size_t>(y) * w + x] = 5.0;

    std::vector<Roi> rois{{"a", 0, 0, 8, 4}, {"b", 10, 10, 8, 4}};
    RoiSnrReport rep = roi_snr(img, w, h, rois);
    REQUIRE(rep.rois.size() == 2);
    CHECK(rep.rois[0].mean == doctest::Approx(10.0));
    CHECK(rep.rois[0].stddev == doctest::Approx(2.0));
    CHECK(*rep.rois[0].snr == doctest::Approx(5.0));
    CHECK_FALSE(rep.rois[1].snr.has_value());
    CHECK(rep.warnings.size() == 1);
    CHECK(*rep.composite == doctest::Approx(5.0));  // only ROI a contributes

    CHECK_THROWS_AS(roi_snr(img, w, h, {{"tiny", 0, 0, 3, 3}}), ConfigError);
    CHECK_THROWS_AS(roi_snr(img, w, h, {{"out", 30, 30, 8, 4}}), ConfigError);
    CHECK_THROWS_AS(roi_snr(img, w, h, {}), ConfigError);
}

TEST_CASE("evaluate_method per-band report") {
    std::vector<double> clean = quadrant(64);
    NormalizedStack ref = stack_from_band(clean, 64, 64);
    ref.n_rows = 2;
    ref.data.resize(ref.size());
    ref.flat_field = {1.0, 1.0};
    for (int a = 0; a < 64; ++a)
        for (int w = 0; w < 64; ++w) {
            double v = clean[static_cast<std::size_t>(a) * 64 + w];
            ref.data[ref.index(w, 0, a)] = v;
            ref.data[ref.index(w, 1, a)] = v;
        }
    NormalizedStack cand = ref;
    auto noisy = oracle_noisy(clean, 99, 0.1);
    cand.set_band_image(1, noisy);

    MetricsSelection sel;
    sel.with_ms_ssim = true;
    sel.ms_ssim_levels = 3;
    MetricsReport rep = evaluate_method(ref, cand, "identity+noise", sel);
    REQUIRE(rep.bands.size() == 2);
    CHECK_FALSE(rep.bands[0].psnr.has_value());  // identical band saturates
    CHECK(*rep.bands[0].ssim == 1.0);
    CHECK(*rep.bands[0].nrmse == 0.0);
    CHECK(rep.bands[1].psnr.has_value());
    CHECK(rep.saturated_psnr_bands == 1);
    CHECK(*rep.mean_psnr == *rep.bands[1].psnr);

    // purity: same inputs, same report, any order
    MetricsReport again = evaluate_method(ref, cand, "identity+noise", sel);
    CHECK(again.fingerprint == rep.fingerprint);
    CHECK(again.to_csv() == rep.to_csv());

    std::string csv = rep.to_csv();
    CHECK(csv.find("method,row,psnr_db,ssim,ms_ssim,nrmse") == 0);
    CHECK(csv.find("sat") != std::string::npos);
    CHECK(rep.to_table().find("mean") != std::string::npos);

    MetricsReport subset = evaluate_method(ref, cand, "m", sel, {1});
    CHECK(subset.bands.size() == 1);
    CHECK_THROWS_AS(evaluate_method(ref, cand, "m", sel, {7}), ConfigError);
}
