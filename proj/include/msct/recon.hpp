#pragma once

#include <string>
#include <vector>

#include "msct/denoise_classical.hpp"
#include "msct/stack_io.hpp"

namespace msct {

/*** Square reconstructed slice, side = sinogram width, rotation axis at
 * (side-1)/2. Values are a linear attenuation proxy: 1/m when pixel_pitch is
 * metric, per-pixel units when pixel_pitch = 1. */
struct SliceImage {
    int side = 0;
    double pixel_pitch = 0.0;  // m
    int band = -1;
    std::vector<double> data;  // row-major, x fastest

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(side) + static_cast<std::size_t>(x);
    }
};

enum class FilterWindow { ramlak, hann };

/*** Pull one band out of a DN stack as a [width x angle] sinogram (width
 * fastest). With log_transform the line integral is p = -ln(max(v, 0.5 DN) /
 * flat_field(band)); without it the raw values pass through. */
std::vector<double> sinogram_from_stack(const SinogramStack& stack, int band, bool log_transform);

/*** Same extraction on the normalized domain (values already v/flat; the
 * 0.5 DN floor maps to 0.5/flat). */
std::vector<double> sinogram_from_stack(const NormalizedStack& stack, int band, bool log_transform);

/*** Parallel-beam FBP. Ramp (Ram-Lak) filtering per projection in the
 * frequency domain with zero-padding to the next power of two >= 2*width,
 * linear-interpolation backprojection, scaled by pi/(2 n_angles pixel_pitch).
 * Pixels outside the inscribed circle (radius (width-1)/2) are masked to
 * zero: they are not covered by the detector at every angle. angles in rad;
 * projection a sits at sinogram[w + width*a]. */
SliceImage fbp(const std::vector<double>& sinogram, int width, const std::vector<double>& angles,
               double pixel_pitch, FilterWindow window = FilterWindow::ramlak, int n_threads = 0);

/*** Evenly spaced angles pi*a/n over [0, pi), the acquisition convention. */
std::vector<double> uniform_angles(int n_angles);

/*** Mean the N noisy realizations per pixel, then log-transform and
 * reconstruct once. N = 1 degenerates to a single-stack reconstruction. */
SliceImage averaged_reference(const std::vector<const SinogramStack*>& stacks, int band,
                              double pixel_pitch, FilterWindow window = FilterWindow::ramlak,
                              int n_threads = 0);

void write_slice(const std::string& path, const SliceImage& slice);
SliceImage read_slice(const std::string& path);

}  // namespace msct
