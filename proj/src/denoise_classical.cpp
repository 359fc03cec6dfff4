#include "msct/denoise_classical.hpp"

#include <algorithm>
#include <cmath>

#include "msct/common.hpp"

namespace msct {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

std::vector<double> gaussian_patch_kernel(int radius) {
    int side = 2 * radius + 1;
    double sigma = std::max(0.5, radius / 2.0);
    std::vector<double> k(static_cast<std::size_t>(side) * side);
    double sum = 0;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            double w = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            k[(dy + radius) * side + (dx + radius)] = w;
            sum += w;
        }
    for (double& w : k) w /= sum;
    return k;
}

}  // namespace

std::vector<double> NormalizedStack::band_image(int row) const {
    std::vector<double> img(static_cast<std::size_t>(width) * n_angles);
    for (int a = 0; a < n_angles; ++a)
        for (int w = 0; w < width; ++w) img[static_cast<std::size_t>(a) * width + w] = data[index(w, row, a)];
    return img;
}

void NormalizedStack::set_band_image(int row, const std::vector<double>& img) {
    if (img.size() != static_cast<std::size_t>(width) * n_angles)
        throw DataError("band image size mismatch");
    for (int a = 0; a < n_angles; ++a)
        for (int w = 0; w < width; ++w) data[index(w, row, a)] = img[static_cast<std::size_t>(a) * width + w];
}

NormalizedStack normalize_per_line(const SinogramStack& stack) {
    stack.validate();
    if (stack.flat_field.size() != static_cast<std::size_t>(stack.n_rows))
        throw DataError("stack carries no flat_field; cannot normalize");
    for (int r = 0; r < stack.n_rows; ++r)
        if (!(stack.flat_field[r] > 1e-6))
            throw DataError("flat_field below 1e-6 DN for row " + std::to_string(r) +
                            "; per-line normalization is undefined");
    NormalizedStack n;
    n.width = stack.width;
    n.n_rows = stack.n_rows;
    n.n_angles = stack.n_angles;
    n.flat_field = stack.flat_field;
    n.source = stack.preset;
    n.data.resize(n.size());
    for (int a = 0; a < n.n_angles; ++a)
        for (int r = 0; r < n.n_rows; ++r) {
            double inv = 1.0 / stack.flat_field[r];
            for (int w = 0; w < n.width; ++w) n.data[n.index(w, r, a)] = stack.at(w, r, a) * inv;
        }
    return n;
}

SinogramStack denormalize(const NormalizedStack& n) {
    SinogramStack stack;
    stack.width = n.width;
    stack.n_rows = n.n_rows;
    stack.n_angles = n.n_angles;
    stack.dtype = StackDType::f32;
    stack.flat_field = n.flat_field;
    stack.preset = n.source;
    stack.allocate();
    for (int a = 0; a < n.n_angles; ++a)
        for (int r = 0; r < n.n_rows; ++r)
            for (int w = 0; w < n.width; ++w)
                stack.f32[stack.index(w, r, a)] =
                    static_cast<float>(n.data[n.index(w, r, a)] * n.flat_field[r]);
    return stack;
}

std::vector<double> nlm_denoise(const std::vector<double>& image, int width, int height, int patch_radius,
                                int search_radius, double h) {
    if (width <= 0 || height <= 0 || image.size() != static_cast<std::size_t>(width) * height)
        throw DataError("nlm: image size mismatch");
    if (patch_radius < 1 || search_radius < 1) throw ConfigError("nlm: radii must be >= 1");
    if (!(h >= 0)) throw ConfigError("nlm: h must be non-negative");
    for (double v : image)
        if (!std::isfinite(v)) throw NumericError("nlm: non-finite input");

    std::vector<double> kernel = gaussian_patch_kernel(patch_radius);
    int side = 2 * patch_radius + 1;
    auto at = [&](int x, int y) { return image[static_cast<std::size_t>(clampi(y, 0, height - 1)) * width +
                                               clampi(x, 0, width - 1)]; };
    std::vector<double> out(image.size());
    double inv_h2 = h > 0 ? 1.0 / (h * h) : 0.0;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double wsum = 0, vsum = 0;
            for (int sy = y - search_radius; sy <= y + search_radius; ++sy) {
                for (int sx = x - search_radius; sx <= x + search_radius; ++sx) {
                    double d2 = 0;
                    for (int dy = -patch_radius; dy <= patch_radius; ++dy)
                        for (int dx = -patch_radius; dx <= patch_radius; ++dx) {
                            double diff = at(x + dx, y + dy) - at(sx + dx, sy + dy);
                            d2 += kernel[(dy + patch_radius) * side + (dx + patch_radius)] * diff * diff;
                        }
                    double w;
                    if (d2 == 0.0)
                        w = 1.0;  // exact matches (incl. self) keep full weight even as h -> 0
                    else if (h == 0.0)
                        w = 0.0;
                    else
                        w = std::exp(-d2 * inv_h2);
                    wsum += w;
                    vsum += w * at(sx, sy);
                }
            }
            out[static_cast<std::size_t>(y) * width + x] = vsum / wsum;
        }
    }
    return out;
}

double total_variation(const std::vector<double>& image, int width, int height) {
    KahanSum tv;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double v = image[static_cast<std::size_t>(y) * width + x];
            double gx = x + 1 < width ? image[static_cast<std::size_t>(y) * width + x + 1] - v : 0.0;
            double gy = y + 1 < height ? image[static_cast<std::size_t>(y + 1) * width + x] - v : 0.0;
            tv.add(std::sqrt(gx * gx + gy * gy));
        }
    return tv.value();
}

std::vector<double> tv_denoise(const std::vector<double>& image, int width, int height, double lambda,
                               int n_iters) {
    if (width <= 0 || height <= 0 || image.size() != static_cast<std::size_t>(width) * height)
        throw DataError("tv: image size mismatch");
    if (n_iters < 1) throw ConfigError("tv: n_iters must be >= 1");
    if (!(lambda > 0)) throw ConfigError("tv: lambda must be positive");

    const double tau = 0.248;
    const double theta = 1.0 / lambda;  // u = f - theta * div p
    std::size_t n = image.size();
    std::vector<double> px(n, 0.0), py(n, 0.0), divp(n, 0.0), u(image), u_prev(n);

    auto idx = [&](int x, int y) { return static_cast<std::size_t>(y) * width + x; };
    auto compute_div = [&]() {
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                double dx = px[idx(x, y)] - (x > 0 ? px[idx(x - 1, y)] : 0.0);
                double dy = py[idx(x, y)] - (y > 0 ? py[idx(x, y - 1)] : 0.0);
                divp[idx(x, y)] = dx + dy;
            }
    };

    for (int it = 0; it < n_iters; ++it) {
        compute_div();
        // w = div p - f / theta; p <- (p + tau grad w) / (1 + tau |grad w|)
        u_prev.swap(u);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                std::size_t i = idx(x, y);
                double w0 = divp[i] - image[i] / theta;
                double wx = x + 1 < width ? (divp[idx(x + 1, y)] - image[idx(x + 1, y)] / theta) - w0 : 0.0;
                double wy = y + 1 < height ? (divp[idx(x, y + 1)] - image[idx(x, y + 1)] / theta) - w0 : 0.0;
                double norm = std::sqrt(wx * wx + wy * wy);
                double denom = 1.0 + tau * norm;
                px[i] = (px[i] + tau * wx) / denom;
                py[i] = (py[i] + tau * wy) / denom;
            }
        compute_div();
        double delta = 0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = image[i] - theta * divp[i];
            delta = std::max(delta, std::abs(u[i] - u_prev[i]));
        }
        if (delta < 1e-8) break;
    }
    return u;
}

NormalizedStack nlm_denoise_stack(const NormalizedStack& n, int patch_radius, int search_radius, double h,
                                  int threads) {
    NormalizedStack out = n;
    parallel_for(static_cast<std::size_t>(n.n_rows), threads, [&](std::size_t r) {
        auto img = n.band_image(static_cast<int>(r));
        auto den = nlm_denoise(img, n.width, n.n_angles, patch_radius, search_radius, h);
        out.set_band_image(static_cast<int>(r), den);
    });
    return out;
}

NormalizedStack tv_denoise_stack(const NormalizedStack& n, double lambda, int n_iters, int threads) {
    NormalizedStack out = n;
    parallel_for(static_cast<std::size_t>(n.n_rows), threads, [&](std::size_t r) {
        auto img = n.band_image(static_cast<int>(r));
        auto den = tv_denoise(img, n.width, n.n_angles, lambda, n_iters);
        out.set_band_image(static_cast<int>(r), den);
    });
    return out;
}

}  // namespace msct
