#pragma once

#include <optional>
#include <string>
#include <vector>

#include "msct/denoise_classical.hpp"

namespace msct {

/*** 10 log10(peak^2 / MSE); nullopt marks saturation (identical inputs). */
std::optional<double> psnr(const std::vector<double>& x, const std::vector<double>& ref, double peak = 1.0);

/*** Mean SSIM with an 11x11 Gaussian window (sigma 1.5), valid-region
 * pooling, population moments; matches the scikit-image convention used to
 * freeze the test constants. */
double ssim(const std::vector<double>& x, const std::vector<double>& ref, int width, int height,
            int window = 11, double k1 = 0.01, double k2 = 0.03, double peak = 1.0);

/*** Multi-scale SSIM: contrast-structure per level, luminance at the
 * coarsest, 2x2 mean-pool downsampling, standard weights renormalized to the
 * level count. */
double ms_ssim(const std::vector<double>& x, const std::vector<double>& ref, int width, int height,
               int levels = 5, double peak = 1.0);

/*** RMSE / (max(ref) - min(ref)); mean normalization selectable. */
double nrmse(const std::vector<double>& x, const std::vector<double>& ref, bool mean_norm = false);

struct Roi {
    std::string name;
    int x = 0, y = 0, w = 0, h = 0;
};

struct RoiSnr {
    std::string name;
    double mean = 0.0;
    double stddev = 0.0;
    std::optional<double> snr;  // nullopt when the ROI is constant
};

struct RoiSnrReport {
    std::vector<RoiSnr> rois;
    std::optional<double> composite;  // sqrt(mean SNR^2) over valid ROIs
    std::vector<std::string> warnings;
};

RoiSnrReport roi_snr(const std::vector<double>& image, int width, int height, const std::vector<Roi>& rois);

struct MetricsSelection {
    bool with_psnr = true;
    bool with_ssim = true;
    bool with_ms_ssim = false;
    bool with_nrmse = true;
    int ms_ssim_levels = 5;
    double peak = 1.0;
    bool nrmse_mean_norm = false;
};

struct BandMetrics {
    int row = 0;
    std::optional<double> psnr;
    std::optional<double> ssim;
    std::optional<double> ms_ssim;
    std::optional<double> nrmse;
};

struct MetricsReport {
    std::string method;
    std::string nrmse_normalization = "range";
    std::uint64_t fingerprint = 0;
    std::vector<BandMetrics> bands;
    std::optional<double> mean_psnr;  // over non-saturated bands
    int saturated_psnr_bands = 0;
    std::optional<double> mean_ssim;
    std::optional<double> mean_ms_ssim;
    std::optional<double> mean_nrmse;

    std::string to_csv() const;
    std::string to_table() const;
};

/*** Per-band metrics of candidate vs reference on the normalized domain.
 * `rows` empty means every band. */
MetricsReport evaluate_method(const NormalizedStack& reference, const NormalizedStack& candidate,
                              const std::string& method, const MetricsSelection& selection,
                              const std::vector<int>& rows = {});

}  // namespace msct
