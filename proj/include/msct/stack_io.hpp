#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "msct/common.hpp"

namespace msct {

enum class StackDType : std::uint8_t { f32 = 0, u16 = 1 };

/*** Sinogram stack for one slice: layout width fastest, then energy row, then
 * angle. GT stacks are f32 (pre-quantization chain values), noisy stacks u16.
 * Row metadata travels in the text sidecar next to the binary file. */
struct SinogramStack {
    int width = 0;
    int n_rows = 0;
    int n_angles = 0;
    StackDType dtype = StackDType::f32;
    std::vector<float> f32;
    std::vector<std::uint16_t> u16;

    std::vector<double> row_e_min, row_e_max, row_e_mean;  // keV per row
    std::vector<double> flat_field;                        // expected DN per row
    std::string preset;
    std::uint64_t seed = 0;

    std::size_t size() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(n_rows) *
               static_cast<std::size_t>(n_angles);
    }
    std::size_t index(int w, int r, int a) const {
        return static_cast<std::size_t>(w) +
               static_cast<std::size_t>(width) *
                   (static_cast<std::size_t>(r) + static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(a));
    }
    double at(int w, int r, int a) const {
        std::size_t i = index(w, r, a);
        return dtype == StackDType::f32 ? static_cast<double>(f32[i]) : static_cast<double>(u16[i]);
    }
    void allocate();
    void validate() const;
};

void write_stack(const std::string& path, const SinogramStack& stack);
SinogramStack read_stack(const std::string& path);

/*** 2-D f32 image in the same container (ndim = 2), used for slice exports. */
void write_image_f32(const std::string& path, const std::vector<float>& data, int width, int height);
std::vector<float> read_image_f32(const std::string& path, int& width, int& height);

/*** 16-bit PGM with window recorded in a sidecar. */
void write_pgm16(const std::string& path, const std::vector<double>& data, int width, int height,
                 double window_lo, double window_hi);

std::map<std::string, std::string> read_sidecar(const std::string& path);
void write_sidecar(const std::string& path, const std::map<std::string, std::string>& kv);

}  // namespace msct
