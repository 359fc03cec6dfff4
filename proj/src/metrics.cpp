#include "msct/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "msct/common.hpp"

namespace msct {

namespace {

void require_same_shape(const std::vector<double>& x, const std::vector<double>& ref) {
    if (x.size() != ref.size() || x.empty()) throw DataError("metrics: shape mismatch or empty input");
}

std::vector<double> gaussian_kernel_1d(int window, double sigma) {
    std::vector<double> k(window);
    int r = window / 2;
    double sum = 0;
    for (int i = 0; i < window; ++i) {
        double d = i - r;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

/*** Separable valid-mode filter; output is (w - window + 1) x (h - window + 1). */
std::vector<double> filter_valid(const std::vector<double>& img, int w, int h, const std::vector<double>& k,
                                 int& ow, int& oh) {
    int window = static_cast<int>(k.size());
    ow = w - window + 1;
    oh = h - window + 1;
    std::vector<double> rows(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < window; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
            rows[static_cast<std::size_t>(y) * ow + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < window; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

struct SsimMeans {
    double ssim = 0.0;
    double cs = 0.0;
};

SsimMeans ssim_means(const std::vector<double>& x, const std::vector<double>& y, int w, int h, int window,
                     double k1, double k2, double peak) {
    if (window < 3 || window % 2 == 0) throw ConfigError("ssim: window must be odd and >= 3");
    if (w < window || h < window)
        throw DataError("ssim: image " + std::to_string(w) + "x" + std::to_string(h) +
                        " is smaller than the window");
    std::vector<double> kernel = gaussian_kernel_1d(window, 1.5);
    std::size_t n = x.size();
    std::vector<double> xx(n), yy(n), xy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    int ow = 0, oh = 0;
    std::vector<double> mx = filter_valid(x, w, h, kernel, ow, oh);
    std::vector<double> my = filter_valid(y, w, h, kernel, ow, oh);
    std::vector<double> mxx = filter_valid(xx, w, h, kernel, ow, oh);
    std::vector<double> myy = filter_valid(yy, w, h, kernel, ow, oh);
    std::vector<double> mxy = filter_valid(xy, w, h, kernel, ow, oh);

    double c1 = k1 * peak * k1 * peak;
    double c2 = k2 * peak * k2 * peak;
    KahanSum ssim_sum, cs_sum;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        double sxx = mxx[i] - mx[i] * mx[i];
        double syy = myy[i] - my[i] * my[i];
        double sxy = mxy[i] - mx[i] * my[i];
        double lum = (2.0 * mx[i] * my[i] + c1) / (mx[i] * mx[i] + my[i] * my[i] + c1);
        double cs = (2.0 * sxy + c2) / (sxx + syy + c2);
        ssim_sum.add(lum * cs);
        cs_sum.add(cs);
    }
    double count = static_cast<double>(mx.size());
    return {ssim_sum.value() / count, cs_sum.value() / count};
}

std::vector<double> downsample2(const std::vector<double>& img, int& w, int& h) {
    int w2 = w / 2, h2 = h / 2;
    std::vector<double> out(static_cast<std::size_t>(w2) * h2);
    for (int y = 0; y < h2; ++y)
        for (int x = 0; x < w2; ++x)
            out[static_cast<std::size_t>(y) * w2 + x] =
                0.25 * (img[static_cast<std::size_t>(2 * y) * w + 2 * x] +
                        img[static_cast<std::size_t>(2 * y) * w + 2 * x + 1] +
                        img[static_cast<std::size_t>(2 * y + 1) * w + 2 * x] +
                        img[static_cast<std::size_t>(2 * y + 1) * w + 2 * x + 1]);
    w = w2;
    h = h2;
    return out;
}

// An absent PSNR means saturation (identical images); any other absent
// metric simply was not selected.
std::string fmt_opt(const std::optional<double>& v, int prec = 6, const char* absent = "-") {
    if (!v) return absent;
    std::ostringstream os;
    os << std::setprecision(prec) << std::fixed << *v;
    return os.str();
}

}  // namespace

std::optional<double> psnr(const std::vector<double>& x, const std::vector<double>& ref, double peak) {
    require_same_shape(x, ref);
    if (!(peak > 0)) throw ConfigError("psnr: peak must be positive");
    KahanSum se;
    for (std::size_t i = 0; i < x.size(); ++i) se.add((x[i] - ref[i]) * (x[i] - ref[i]));
    double mse = se.value() / static_cast<double>(x.size());
    if (mse == 0.0) return std::nullopt;
    return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const std::vector<double>& x, const std::vector<double>& ref, int width, int height, int window,
            double k1, double k2, double peak) {
    require_same_shape(x, ref);
    if (x.size() != static_cast<std::size_t>(width) * height) throw DataError("ssim: dims mismatch");
    return ssim_means(x, ref, width, height, window, k1, k2, peak).ssim;
}

double ms_ssim(const std::vector<double>& x, const std::vector<double>& ref, int width, int height, int levels,
               double peak) {
    require_same_shape(x, ref);
    if (x.size() != static_cast<std::size_t>(width) * height) throw DataError("ms_ssim: dims mismatch");
    if (levels < 1 || levels > 5) throw ConfigError("ms_ssim: levels must lie in [1, 5]");
    int need = 11 << (levels - 1);
    if (width < need || height < need)
        throw DataError("ms_ssim: image too small for a " + std::to_string(levels) + "-level pyramid (needs " +
                        std::to_string(need) + " px per side)");

    static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    double wsum = 0;
    for (int i = 0; i < levels; ++i) wsum += kWeights[i];

    std::vector<double> a(x), b(ref);
    int w = width, h = height;
    double product = 1.0;
    for (int lvl = 0; lvl < levels; ++lvl) {
        SsimMeans m = ssim_means(a, b, w, h, 11, 0.01, 0.03, peak);
        double term = lvl == levels - 1 ? std::max(m.ssim, 0.0) : std::max(m.cs, 0.0);
        product *= std::pow(term, kWeights[lvl] / wsum);
        if (lvl + 1 < levels) {
            int wa = w, ha = h;
            a = downsample2(a, wa, ha);
            b = downsample2(b, w, h);
        }
    }
    return product;
}

double nrmse(const std::vector<double>& x, const std::vector<double>& ref, bool mean_norm) {
    require_same_shape(x, ref);
    KahanSum se;
    for (std::size_t i = 0; i < x.size(); ++i) se.add((x[i] - ref[i]) * (x[i] - ref[i]));
    double rmse = std::sqrt(se.value() / static_cast<double>(x.size()));
    double denom;
    if (mean_norm) {
        KahanSum m;
        for (double v : ref) m.add(v);
        denom = m.value() / static_cast<double>(ref.size());
    } else {
        auto [lo, hi] = std::minmax_element(ref.begin(), ref.end());
        denom = *hi - *lo;
    }
    if (!(std::abs(denom) > 0)) throw DataError("nrmse: constant reference, normalization undefined");
    return rmse / std::abs(denom);
}

RoiSnrReport roi_snr(const std::vector<double>& image, int width, int height, const std::vector<Roi>& rois) {
    if (image.size() != static_cast<std::size_t>(width) * height) throw DataError("roi_snr: dims mismatch");
    if (rois.empty()) throw ConfigError("roi_snr: empty ROI set");
    RoiSnrReport report;
    KahanSum sq;
    int valid = 0;
    for (const Roi& roi : rois) {
        if (roi.w <= 0 || roi.h <= 0 || roi.x < 0 || roi.y < 0 || roi.x + roi.w > width ||
            roi.y + roi.h > height)
            throw ConfigError("roi_snr: ROI '" + roi.name + "' outside the image");
        if (roi.w * roi.h < 16) throw ConfigError("roi_snr: ROI '" + roi.name + "' smaller than 16 pixels");
        KahanSum s, s2;
        for (int y = roi.y; y < roi.y + roi.h; ++y)
            for (int x = roi.x; x < roi.x + roi.w; ++x) {
                double v = image[static_cast<std::size_t>(y) * width + x];
                s.add(v);
                s2.add(v * v);
            }
        double n = static_cast<double>(roi.w) * roi.h;
        double mean = s.value() / n;
        double var = std::max(0.0, s2.value() / n - mean * mean);
        double stddev = std::sqrt(var);
        RoiSnr r{roi.name, mean, stddev, std::nullopt};
        if (stddev > 0) {
            r.snr = mean / stddev;
            sq.add(*r.snr * *r.snr);
            ++valid;
        } else {
            report.warnings.push_back("ROI '" + roi.name + "' has zero variance; excluded from the composite");
        }
        report.rois.push_back(std::move(r));
    }
    if (valid > 0) report.composite = std::sqrt(sq.value() / valid);
    return report;
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "method,row,psnr_db,ssim,ms_ssim,nrmse\n";
    os << std::setprecision(9);
    for (const BandMetrics& b : bands) {
        os << method << ',' << b.row << ',' << fmt_opt(b.psnr, 6, "sat") << ',' << fmt_opt(b.ssim) << ','
           << fmt_opt(b.ms_ssim) << ',' << fmt_opt(b.nrmse) << '\n';
    }
    os << method << ",mean," << fmt_opt(mean_psnr, 6, "sat") << ',' << fmt_opt(mean_ssim) << ','
       << fmt_opt(mean_ms_ssim) << ',' << fmt_opt(mean_nrmse) << '\n';
    return os.str();
}

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(18) << "method" << std::right << std::setw(6) << "row" << std::setw(12)
       << "psnr" << std::setw(12) << "ssim" << std::setw(12) << "ms_ssim" << std::setw(12) << "nrmse" << '\n';
    auto row = [&](const std::string& label, const BandMetrics& b) {
        os << std::left << std::setw(18) << method << std::right << std::setw(6) << label << std::setw(12)
           << fmt_opt(b.psnr, 4, "sat") << std::setw(12) << fmt_opt(b.ssim, 4) << std::setw(12)
           << fmt_opt(b.ms_ssim, 4) << std::setw(12) << fmt_opt(b.nrmse, 4) << '\n';
    };
    for (const BandMetrics& b : bands) row(std::to_string(b.row), b);
    BandMetrics agg{0, mean_psnr, mean_ssim, mean_ms_ssim, mean_nrmse};
    row("mean", agg);
    return os.str();
}

MetricsReport evaluate_method(const NormalizedStack& reference, const NormalizedStack& candidate,
                              const std::string& method, const MetricsSelection& selection,
                              const std::vector<int>& rows) {
    if (reference.width != candidate.width || reference.n_rows != candidate.n_rows ||
        reference.n_angles != candidate.n_angles)
        throw DataError("evaluate_method: stack shapes differ");
    std::vector<int> use_rows = rows;
    if (use_rows.empty())
        for (int r = 0; r < reference.n_rows; ++r) use_rows.push_back(r);
    for (int r : use_rows)
        if (r < 0 || r >= reference.n_rows) throw ConfigError("evaluate_method: row out of range");

    MetricsReport report;
    report.method = method;
    report.nrmse_normalization = selection.nrmse_mean_norm ? "mean" : "range";
    std::uint64_t fp = fnv1a64(method);
    fp = fnv1a64(reference.data.data(), reference.data.size() * sizeof(double), fp);
    fp = fnv1a64(candidate.data.data(), candidate.data.size() * sizeof(double), fp);
    report.fingerprint = fp;

    KahanSum psnr_sum, ssim_sum, ms_sum, nrmse_sum;
    int psnr_n = 0, ssim_n = 0, ms_n = 0, nrmse_n = 0;
    for (int r : use_rows) {
        BandMetrics bm;
        bm.row = r;
        std::vector<double> ref_img = reference.band_image(r);
        std::vector<double> cand_img = candidate.band_image(r);
        int w = reference.width, h = reference.n_angles;
        if (selection.with_psnr) {
            bm.psnr = psnr(cand_img, ref_img, selection.peak);
            if (bm.psnr) {
                psnr_sum.add(*bm.psnr);
                ++psnr_n;
            } else {
                ++report.saturated_psnr_bands;
            }
        }
        if (selection.with_ssim) {
            bm.ssim = ssim(cand_img, ref_img, w, h, 11, 0.01, 0.03, selection.peak);
            ssim_sum.add(*bm.ssim);
            ++ssim_n;
        }
        if (selection.with_ms_ssim) {
            bm.ms_ssim = ms_ssim(cand_img, ref_img, w, h, selection.ms_ssim_levels, selection.peak);
            ms_sum.add(*bm.ms_ssim);
            ++ms_n;
        }
        if (selection.with_nrmse) {
            bm.nrmse = nrmse(cand_img, ref_img, selection.nrmse_mean_norm);
            nrmse_sum.add(*bm.nrmse);
            ++nrmse_n;
        }
        report.bands.push_back(bm);
    }
    if (psnr_n > 0) report.mean_psnr = psnr_sum.value() / psnr_n;
    if (ssim_n > 0) report.mean_ssim = ssim_sum.value() / ssim_n;
    if (ms_n > 0) report.mean_ms_ssim = ms_sum.value() / ms_n;
    if (nrmse_n > 0) report.mean_nrmse = nrmse_sum.value() / nrmse_n;
    return report;
}

}  // namespace msct
