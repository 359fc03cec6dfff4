#include "msct/recon.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

#include "msct/common.hpp"

namespace msct {

namespace {

constexpr double kLogFloorDn = 0.5;

// fftw plan creation/destruction is not thread-safe
std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/*** |omega| response of the band-limited ramp: FFT of the spatial kernel
 * h[0] = 1/4, h[odd n] = -1/(pi^2 n^2), doubled per the classical recipe so
 * the final pi/(2 n_angles) scale lands on pi/n_angles net. */
std::vector<double> ramp_response(std::size_t n, FilterWindow window) {
    std::vector<double> kernel(n, 0.0);
    kernel[0] = 0.25;
    for (std::size_t i = 1; i < n / 2 + 1; i += 2) {
        double v = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(i * i));
        kernel[i] = v;
        kernel[n - i] = v;
    }
    std::vector<std::complex<double>> freq(n / 2 + 1);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), kernel.data(),
                                              reinterpret_cast<fftw_complex*>(freq.data()),
                                              FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    std::vector<double> response(n / 2 + 1);
    for (std::size_t k = 0; k < response.size(); ++k) {
        response[k] = 2.0 * freq[k].real();
        if (window == FilterWindow::hann) {
            response[k] *= 0.5 * (1.0 + std::cos(2.0 * std::numbers::pi * static_cast<double>(k) /
                                                 static_cast<double>(n)));
        }
    }
    return response;
}

std::vector<double> filter_projections(const std::vector<double>& sinogram, int width, int n_angles,
                                       FilterWindow window, int n_threads) {
    std::size_t padded = next_pow2(2 * static_cast<std::size_t>(width));
    std::vector<double> response = ramp_response(padded, window);

    fftw_plan fwd, inv;
    {
        // template plans reused across threads through the new-array interface
        std::vector<double> real_buf(padded, 0.0);
        std::vector<std::complex<double>> freq_buf(padded / 2 + 1);
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fwd = fftw_plan_dft_r2c_1d(static_cast<int>(padded), real_buf.data(),
                                   reinterpret_cast<fftw_complex*>(freq_buf.data()),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
        inv = fftw_plan_dft_c2r_1d(static_cast<int>(padded), reinterpret_cast<fftw_complex*>(freq_buf.data()),
                                   real_buf.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    }

    std::vector<double> filtered(sinogram.size());
    parallel_for(static_cast<std::size_t>(n_angles), n_threads, [&](std::size_t a) {
        std::vector<double> real_buf(padded, 0.0);
        std::vector<std::complex<double>> freq_buf(padded / 2 + 1);
        const double* src = sinogram.data() + a * static_cast<std::size_t>(width);
        std::copy(src, src + width, real_buf.begin());
        fftw_execute_dft_r2c(fwd, real_buf.data(), reinterpret_cast<fftw_complex*>(freq_buf.data()));
        for (std::size_t k = 0; k < freq_buf.size(); ++k) freq_buf[k] *= response[k];
        fftw_execute_dft_c2r(inv, reinterpret_cast<fftw_complex*>(freq_buf.data()), real_buf.data());
        double* dst = filtered.data() + a * static_cast<std::size_t>(width);
        for (int w = 0; w < width; ++w) dst[w] = real_buf[static_cast<std::size_t>(w)] / static_cast<double>(padded);
    });

    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }
    return filtered;
}

std::vector<double> log_transform_band(const std::vector<double>& values, double flat, int band) {
    if (flat <= 0.0) {
        throw DataError("flat_field for band " + std::to_string(band) +
                        " is not positive; cannot log-transform");
    }
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = -std::log(std::max(values[i], kLogFloorDn) / flat);
    }
    return out;
}

}  // namespace

std::vector<double> sinogram_from_stack(const SinogramStack& stack, int band, bool log_transform) {
    stack.validate();
    if (band < 0 || band >= stack.n_rows) {
        throw ConfigError("band " + std::to_string(band) + " outside [0, " +
                          std::to_string(stack.n_rows) + ")");
    }
    std::vector<double> sino(static_cast<std::size_t>(stack.width) * stack.n_angles);
    for (int a = 0; a < stack.n_angles; ++a) {
        for (int w = 0; w < stack.width; ++w) {
            sino[static_cast<std::size_t>(a) * stack.width + w] = stack.at(w, band, a);
        }
    }
    if (!log_transform) return sino;
    return log_transform_band(sino, stack.flat_field.at(static_cast<std::size_t>(band)), band);
}

std::vector<double> sinogram_from_stack(const NormalizedStack& stack, int band, bool log_transform) {
    if (band < 0 || band >= stack.n_rows) {
        throw ConfigError("band " + std::to_string(band) + " outside [0, " +
                          std::to_string(stack.n_rows) + ")");
    }
    std::vector<double> sino = stack.band_image(band);
    if (!log_transform) return sino;
    double flat = stack.flat_field.at(static_cast<std::size_t>(band));
    if (flat <= 0.0) {
        throw DataError("flat_field for band " + std::to_string(band) +
                        " is not positive; cannot log-transform");
    }
    for (double& v : sino) v = -std::log(std::max(v, kLogFloorDn / flat));
    return sino;
}

std::vector<double> uniform_angles(int n_angles) {
    if (n_angles < 1) throw ConfigError("n_angles must be positive");
    std::vector<double> angles(static_cast<std::size_t>(n_angles));
    for (int a = 0; a < n_angles; ++a) {
        angles[static_cast<std::size_t>(a)] = std::numbers::pi * a / n_angles;
    }
    return angles;
}

SliceImage fbp(const std::vector<double>& sinogram, int width, const std::vector<double>& angles,
               double pixel_pitch, FilterWindow window, int n_threads) {
    int n_angles = static_cast<int>(angles.size());
    if (n_angles < 2) throw ConfigError("fbp needs at least 2 angles");
    if (width < 4) throw ConfigError("fbp needs width >= 4");
    if (pixel_pitch <= 0.0) throw ConfigError("pixel_pitch must be positive");
    if (sinogram.size() != static_cast<std::size_t>(width) * n_angles) {
        throw DataError("sinogram size does not match width * n_angles");
    }
    for (double v : sinogram) {
        if (!std::isfinite(v)) throw NumericError("non-finite sinogram value");
    }

    std::vector<double> filtered = filter_projections(sinogram, width, n_angles, window, n_threads);

    SliceImage slice;
    slice.side = width;
    slice.pixel_pitch = pixel_pitch;
    slice.data.assign(static_cast<std::size_t>(width) * width, 0.0);

    std::vector<double> cs(angles.size()), sn(angles.size());
    for (std::size_t a = 0; a < angles.size(); ++a) {
        cs[a] = std::cos(angles[a]);
        sn[a] = std::sin(angles[a]);
    }
    const double centre = (width - 1) / 2.0;
    const double scale = std::numbers::pi / (2.0 * n_angles * pixel_pitch);

    parallel_for(static_cast<std::size_t>(width), n_threads, [&](std::size_t row) {
        double y = static_cast<double>(row) - centre;
        double* out = slice.data.data() + row * static_cast<std::size_t>(width);
        for (int x = 0; x < width; ++x) {
            double xr = x - centre;
            // pixels outside the inscribed circle are not seen by every
            // projection; mask them like the common FBP default does
            if (xr * xr + y * y > centre * centre) {
                out[x] = 0.0;
                continue;
            }
            double acc = 0.0;
            for (std::size_t a = 0; a < angles.size(); ++a) {
                double s = xr * cs[a] + y * sn[a] + centre;
                if (s < 0.0 || s > width - 1) continue;
                int lo = static_cast<int>(s);
                if (lo == width - 1) lo = width - 2;
                double frac = s - lo;
                const double* proj = filtered.data() + a * static_cast<std::size_t>(width);
                acc += (1.0 - frac) * proj[lo] + frac * proj[lo + 1];
            }
            out[x] = acc * scale;
        }
    });
    return slice;
}

SliceImage averaged_reference(const std::vector<const SinogramStack*>& stacks, int band,
                              double pixel_pitch, FilterWindow window, int n_threads) {
    if (stacks.empty()) throw ConfigError("averaged_reference needs at least one stack");
    const SinogramStack& first = *stacks.front();
    first.validate();
    for (const SinogramStack* s : stacks) {
        if (s->width != first.width || s->n_rows != first.n_rows || s->n_angles != first.n_angles) {
            throw DataError("averaged_reference: stack dims mismatch");
        }
    }
    if (band < 0 || band >= first.n_rows) {
        throw ConfigError("band " + std::to_string(band) + " outside [0, " +
                          std::to_string(first.n_rows) + ")");
    }

    std::vector<double> mean(static_cast<std::size_t>(first.width) * first.n_angles, 0.0);
    for (const SinogramStack* s : stacks) {
        for (int a = 0; a < first.n_angles; ++a) {
            for (int w = 0; w < first.width; ++w) {
                mean[static_cast<std::size_t>(a) * first.width + w] += s->at(w, band, a);
            }
        }
    }
    for (double& v : mean) v /= static_cast<double>(stacks.size());

    std::vector<double> sino =
        log_transform_band(mean, first.flat_field.at(static_cast<std::size_t>(band)), band);
    SliceImage slice = fbp(sino, first.width, uniform_angles(first.n_angles), pixel_pitch, window, n_threads);
    slice.band = band;
    return slice;
}

void write_slice(const std::string& path, const SliceImage& slice) {
    std::vector<float> f32(slice.data.size());
    for (std::size_t i = 0; i < f32.size(); ++i) f32[i] = static_cast<float>(slice.data[i]);
    write_image_f32(path, f32, slice.side, slice.side);
    std::map<std::string, std::string> kv;
    std::ostringstream pitch;
    pitch.precision(17);
    pitch << slice.pixel_pitch;
    kv["pixel_pitch"] = pitch.str();
    kv["band"] = std::to_string(slice.band);
    write_sidecar(path + ".meta", kv);
}

SliceImage read_slice(const std::string& path) {
    SliceImage slice;
    int w = 0, h = 0;
    std::vector<float> f32 = read_image_f32(path, w, h);
    if (w != h) throw DataError(path + ": slice image is not square");
    slice.side = w;
    slice.data.assign(f32.begin(), f32.end());
    std::map<std::string, std::string> kv = read_sidecar(path + ".meta");
    if (auto it = kv.find("pixel_pitch"); it != kv.end()) slice.pixel_pitch = std::stod(it->second);
    if (auto it = kv.find("band"); it != kv.end()) slice.band = std::stoi(it->second);
    return slice;
}

}  // namespace msct
