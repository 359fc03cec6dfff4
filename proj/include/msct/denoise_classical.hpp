#pragma once

#include <string>
#include <vector>

#include "msct/stack_io.hpp"

namespace msct {

/*** Per-row flat-field normalized stack; values nominally in [0, 1] but noise
 * excursions above 1 are preserved deliberately. */
struct NormalizedStack {
    int width = 0;
    int n_rows = 0;
    int n_angles = 0;
    std::vector<double> data;
    std::vector<double> flat_field;  // per row, DN
    std::string source;

    std::size_t index(int w, int r, int a) const {
        return static_cast<std::size_t>(w) +
               static_cast<std::size_t>(width) *
                   (static_cast<std::size_t>(r) + static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(a));
    }
    std::size_t size() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(n_rows) *
               static_cast<std::size_t>(n_angles);
    }
    /*** One energy band as a (width x n_angles) image, width fastest. */
    std::vector<double> band_image(int row) const;
    void set_band_image(int row, const std::vector<double>& img);
};

NormalizedStack normalize_per_line(const SinogramStack& stack);
SinogramStack denormalize(const NormalizedStack& n);

/*** Non-local means on a single image with Gaussian-weighted patch distances;
 * replicate padding at borders, weights normalized per pixel. */
std::vector<double> nlm_denoise(const std::vector<double>& image, int width, int height, int patch_radius,
                                int search_radius, double h);

/*** TV(u) + (lambda/2)||u - f||^2 minimized with Chambolle's dual projection,
 * step 0.248; stops after n_iters or when the iterate stagnates below 1e-8. */
std::vector<double> tv_denoise(const std::vector<double>& image, int width, int height, double lambda,
                               int n_iters);

/*** Isotropic discrete total variation (forward differences). */
double total_variation(const std::vector<double>& image, int width, int height);

/*** Per-band application across the energy dimension of a normalized stack. */
NormalizedStack nlm_denoise_stack(const NormalizedStack& n, int patch_radius, int search_radius, double h,
                                  int threads);
NormalizedStack tv_denoise_stack(const NormalizedStack& n, double lambda, int n_iters, int threads);

}  // namespace msct
