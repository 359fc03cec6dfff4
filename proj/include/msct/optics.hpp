#pragma once

#include <string>
#include <vector>

#include "msct/materials.hpp"

namespace msct {

/*** Prism-array geometry. Presets: "bm18-sim" (n_pa 50, alpha 60 deg, y 0.1 mm,
 * d 10 m, 6.5 um rows) and "bm18-exp" (n_pa 100, alpha 70.52 deg, d 28 m,
 * 14.28 um rows). Row 0 sits at zero deflection; cell n spans rows
 * [n-0.5, n+0.5). */
struct PrismGeometry {
    double alpha_p = 0.0;   // rad, prism tip angle
    int n_pa = 0;           // prisms per array
    double y = 0.0;         // m, impinging position
    double d = 0.0;         // m, prism-to-detector distance
    double h_pixel = 0.0;   // m, detector row pitch
    int n_rows = 0;
    DeltaModel delta;

    void validate() const;
};

PrismGeometry preset_geometry(const std::string& name);

/*** Eq-style absorption path through the prism stack: z = 2 tan(a/2) y n_pa. */
double prism_path_length(const PrismGeometry& geom);

/*** Attenuate each bin by exp(-mu_Si(E) * z); grid unchanged. */
EnergySpectrum prism_transmission(const EnergySpectrum& spectrum, const PrismGeometry& geom,
                                  const MaterialTable& si);

/*** Single-prism deflection gamma(E) = asin(sin(a/2)/(1-delta)) - a/2. */
double deflection_angle(double e_kev, const PrismGeometry& geom);

/*** Continuous detector row: row(E) = 2 n_pa gamma(E) d / h_pixel. */
double energy_to_row(double e_kev, const PrismGeometry& geom);

/*** Invert energy_to_row for row > 0 (closed form through the delta model). */
double energy_at_row(double row, const PrismGeometry& geom);

/*** Solve c_delta so that energy_to_row(anchor_energy) = anchor_row, closed
 * form plus one Newton refinement on the exact expression. */
DeltaModel calibrate_delta(const PrismGeometry& geom, double anchor_energy_kev, double anchor_row);

/*** Precomputed bin-to-row assignment: every grid bin splits its photons over
 * row cells proportionally to energy overlap with the inverted cell ranges.
 * CSR layout over bins; fractions per bin sum to 1 minus the discarded part. */
struct DispersionPlan {
    EnergyGrid grid;
    std::vector<std::uint32_t> offsets;   // n_bins + 1
    std::vector<std::uint16_t> span_row;  // row index per span
    std::vector<double> span_fraction;    // fraction of the bin's photons
    std::vector<double> cell_e_lo;        // per row, keV (clipped to grid)
    std::vector<double> cell_e_hi;

    int n_rows() const { return static_cast<int>(cell_e_lo.size()); }
};

DispersionPlan build_dispersion_plan(const EnergyGrid& grid, const PrismGeometry& geom);

struct DispersedRows {
    std::vector<double> row_counts;
    double discarded = 0.0;
};

DispersedRows disperse_spectrum_to_rows(const EnergySpectrum& spectrum, const PrismGeometry& geom);
DispersedRows apply_dispersion(const DispersionPlan& plan, const std::vector<double>& photons_per_bin);

}  // namespace msct
