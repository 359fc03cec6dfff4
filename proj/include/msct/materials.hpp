#pragma once

#include <string>
#include <vector>

#include "msct/common.hpp"

namespace msct {

/*** Uniform simulation energy grid; bin i spans
 * [e_min + i*pitch, e_min + (i+1)*pitch). Default pitch is 10 eV. */
struct EnergyGrid {
    double e_min = 22.9;   // keV
    double pitch = 0.010;  // keV
    int n_bins = 0;

    double bin_lo(int i) const { return e_min + i * pitch; }
    double bin_hi(int i) const { return e_min + (i + 1) * pitch; }
    double bin_center(int i) const { return e_min + (i + 0.5) * pitch; }
    double e_max() const { return e_min + n_bins * pitch; }
    void validate() const;
};

/*** Sampled linear attenuation curve, strictly increasing energies, 1/m.
 * Lookup outside the sampled range is a hard error, never extrapolation. */
struct MaterialTable {
    std::string name;
    std::vector<double> energy;  // keV, strictly increasing
    std::vector<double> mu;      // 1/m, positive
    double density = 0.0;        // kg/m^3, informational

    double e_lo() const { return energy.front(); }
    double e_hi() const { return energy.back(); }
};

/*** Source spectrum resampled onto a grid; photons per bin per pixel per
 * exposure. */
struct EnergySpectrum {
    EnergyGrid grid;
    std::vector<double> photons_per_bin;

    double total() const;
};

/*** Silicon refractive decrement model, delta(E) = C / E^2. */
struct DeltaModel {
    double c_delta = 0.0;  // keV^2
};

MaterialTable load_material_table(const std::string& path, const std::string& name = "",
                                  double density = 0.0);

double linear_attenuation(const MaterialTable& table, double e_kev);

/*** Load the two-column spectrum file (keV, photons per 10 eV reference bin)
 * and resample onto `grid` by linear interpolation at bin centers, scaled by
 * pitch/0.010. Grid bins outside the file's energy span are an error. */
EnergySpectrum load_spectrum(const std::string& path, const EnergyGrid& grid);

double delta_si(const DeltaModel& model, double e_kev);

}  // namespace msct
