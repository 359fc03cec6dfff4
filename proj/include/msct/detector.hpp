#pragma once

#include <cstdint>
#include <vector>

#include "msct/materials.hpp"
#include "msct/optics.hpp"
#include "msct/phantom.hpp"
#include "msct/stack_io.hpp"

namespace msct {

struct DetectorConfig {
    double scint_thickness = 2e-3;  // m, LuAG:Ce
    double scint_yield = 25000.0;   // optical photons / MeV
    double optical_loss = 4000.0;   // divisor on generated optical photons
    double qe = 0.82;
    double electrons_per_dn = 0.46;
    double exposure = 0.010;         // s; scales photon counts relative to the 10 ms reference
    double dark_current = 2.0;       // e- per exposure (not in the reference chain)
    double prnu_sigma = 0.001;       // relative gain spread
    double readout_sigma_sq = 0.64;  // e-^2
    int bit_depth = 16;

    void validate() const;
    double dn_max() const { return static_cast<double>((1u << bit_depth) - 1u); }
};

/*** 1 - exp(-mu_luag(E) * t): fraction of photons stopped in the scintillator. */
double scintillator_absorbed_fraction(double e_kev, const DetectorConfig& cfg, const MaterialTable& luag);

/*** Photon counts per energy for one detector cell, before the detector chain. */
struct BinnedCounts {
    std::vector<double> energy_kev;
    std::vector<double> counts;
};

/*** Noise-free expected DN for the counts (dark current excluded). */
double expected_gray_value(const BinnedCounts& counts, const DetectorConfig& cfg, const MaterialTable& luag);

/*** Full stochastic chain: per-bin Poisson on absorbed photons, optical
 * conversion, Poisson shot noise, QE, dark current, PRNU, DSNU, readout,
 * quantization to DN. Deterministic in `seed`. */
std::uint16_t apply_noise(const BinnedCounts& counts, const DetectorConfig& cfg, const MaterialTable& luag,
                          std::uint64_t seed);

/*** Final chain stage on its own: divide by electrons_per_dn, round half to
 * even, clamp to the bit-depth range. */
std::uint16_t quantize_dn(double electrons, const DetectorConfig& cfg);

/*** Per-bin chain factors on an energy grid, hoisted out of the pixel loop. */
struct ChainFactors {
    std::vector<double> absorbed;            // absorbed fraction per bin
    std::vector<double> optical_per_photon;  // optical photons per absorbed photon
};
ChainFactors build_chain_factors(const EnergyGrid& grid, const DetectorConfig& cfg, const MaterialTable& luag);

/*** Expected DN per detector row for an unobstructed beam. */
std::vector<double> flat_field(const EnergySpectrum& source, const PrismGeometry& geom, const DetectorConfig& cfg,
                               const MaterialTable& si, const MaterialTable& luag);

struct SimulationArgs {
    const VoxelPhantom* phantom = nullptr;
    std::vector<int> slices;  // z indices
    PrismGeometry geom;
    DetectorConfig det;
    const EnergySpectrum* source = nullptr;  // raw tube/ring spectrum on the grid
    const MaterialTable* si = nullptr;
    const MaterialTable* mat1 = nullptr;
    const MaterialTable* mat2 = nullptr;
    const MaterialTable* luag = nullptr;
    int width = 256;
    double pixel_pitch = 1e-4;  // m, sample-plane sampling of the projection
    int n_angles = 90;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string preset_name;
};

struct SlicePair {
    int slice_z = 0;
    SinogramStack gt;     // f32
    SinogramStack noisy;  // u16
};

std::vector<SlicePair> simulate_dataset(const SimulationArgs& args);

}  // namespace msct
