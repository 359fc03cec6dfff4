#include "msct/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msct {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void PrismGeometry::validate() const {
    if (!(alpha_p > 0.0 && alpha_p < kPi)) throw ConfigError("prism tip angle outside (0, pi)");
    if (n_pa < 1) throw ConfigError("n_pa must be >= 1");
    if (y <= 0.0 || d <= 0.0 || h_pixel <= 0.0) throw ConfigError("y, d, h_pixel must be positive");
    if (n_rows < 1) throw ConfigError("n_rows must be >= 1");
}

PrismGeometry preset_geometry(const std::string& name) {
    PrismGeometry g;
    if (name == "bm18-sim") {
        g.alpha_p = 60.0 * kPi / 180.0;
        g.n_pa = 50;
        g.y = 1e-4;
        g.d = 10.0;
        g.h_pixel = 6.5e-6;
        g.n_rows = 100;
    } else if (name == "bm18-exp") {
        g.alpha_p = 70.52 * kPi / 180.0;
        g.n_pa = 100;
        g.y = 1e-4;
        g.d = 28.0;
        g.h_pixel = 14.28e-6;
        g.n_rows = 100;
    } else {
        throw ConfigError("unknown geometry preset: " + name);
    }
    return g;
}

double prism_path_length(const PrismGeometry& geom) {
    return 2.0 * std::tan(geom.alpha_p / 2.0) * geom.y * geom.n_pa;
}

EnergySpectrum prism_transmission(const EnergySpectrum& spectrum, const PrismGeometry& geom,
                                  const MaterialTable& si) {
    const double z = prism_path_length(geom);
    EnergySpectrum out = spectrum;
    for (int i = 0; i < spectrum.grid.n_bins; ++i) {
        double e = spectrum.grid.bin_center(i);
        out.photons_per_bin[static_cast<std::size_t>(i)] *=
            std::exp(-linear_attenuation(si, e) * z);
    }
    return out;
}

double deflection_angle(double e_kev, const PrismGeometry& geom) {
    const double s = std::sin(geom.alpha_p / 2.0);
    const double delta = delta_si(geom.delta, e_kev);
    const double arg = s / (1.0 - delta);
    if (delta >= 1.0 - s || arg >= 1.0) {
        throw NumericError("deflection_angle: delta outside arcsin domain (unphysical calibration)");
    }
    return std::asin(arg) - geom.alpha_p / 2.0;
}

double energy_to_row(double e_kev, const PrismGeometry& geom) {
    const double alpha_pa = 2.0 * geom.n_pa * deflection_angle(e_kev, geom);
    return alpha_pa * geom.d / geom.h_pixel;
}

double energy_at_row(double row, const PrismGeometry& geom) {
    if (row <= 0.0) throw NumericError("energy_at_row: row must be positive");
    const double s = std::sin(geom.alpha_p / 2.0);
    const double gamma = row * geom.h_pixel / (2.0 * geom.n_pa * geom.d);
    const double delta = 1.0 - s / std::sin(gamma + geom.alpha_p / 2.0);
    if (delta <= 0.0) throw NumericError("energy_at_row: row maps to negative delta");
    return std::sqrt(geom.delta.c_delta / delta);
}

DeltaModel calibrate_delta(const PrismGeometry& geom, double anchor_energy_kev, double anchor_row) {
    if (anchor_row <= 0.0) throw ConfigError("calibrate_delta: anchor_row must be positive");
    const double s = std::sin(geom.alpha_p / 2.0);
    const double gamma0 = anchor_row * geom.h_pixel / (2.0 * geom.n_pa * geom.d);
    const double delta0 = 1.0 - s / std::sin(gamma0 + geom.alpha_p / 2.0);
    if (delta0 <= 0.0 || delta0 >= 1.0 - s) {
        throw NumericError("calibrate_delta: no solution inside arcsin domain");
    }
    DeltaModel model{delta0 * anchor_energy_kev * anchor_energy_kev};

    // one Newton refinement on the exact expression
    PrismGeometry g = geom;
    g.delta = model;
    const double e2 = anchor_energy_kev * anchor_energy_kev;
    const double delta = model.c_delta / e2;
    const double u = s / (1.0 - delta);
    const double drow_dc =
        2.0 * geom.n_pa * geom.d / geom.h_pixel * s /
        ((1.0 - delta) * (1.0 - delta) * std::sqrt(1.0 - u * u)) / e2;
    const double f = energy_to_row(anchor_energy_kev, g) - anchor_row;
    model.c_delta -= f / drow_dc;
    return model;
}

DispersionPlan build_dispersion_plan(const EnergyGrid& grid, const PrismGeometry& geom) {
    grid.validate();
    geom.validate();
    if (geom.delta.c_delta <= 0.0) throw ConfigError("dispersion requires calibrated delta");

    DispersionPlan plan;
    plan.grid = grid;
    const int n_rows = geom.n_rows;

    // Inverted cell boundaries: bound[n] = energy at row n - 0.5 (n >= 1);
    // cell 0 is open toward high energies. Energies decrease with row index.
    std::vector<double> bound_hi(static_cast<std::size_t>(n_rows) + 1);
    bound_hi[0] = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= n_rows; ++n) {
        bound_hi[static_cast<std::size_t>(n)] = energy_at_row(n - 0.5, geom);
    }
    plan.cell_e_lo.resize(static_cast<std::size_t>(n_rows));
    plan.cell_e_hi.resize(static_cast<std::size_t>(n_rows));
    for (int n = 0; n < n_rows; ++n) {
        double hi = std::min(bound_hi[static_cast<std::size_t>(n)], grid.e_max());
        double lo = std::max(bound_hi[static_cast<std::size_t>(n) + 1], grid.e_min);
        plan.cell_e_hi[static_cast<std::size_t>(n)] = hi;
        plan.cell_e_lo[static_cast<std::size_t>(n)] = std::min(lo, hi);
    }

    plan.offsets.resize(static_cast<std::size_t>(grid.n_bins) + 1, 0);
    for (int i = 0; i < grid.n_bins; ++i) {
        const double e_lo = grid.bin_lo(i), e_hi = grid.bin_hi(i);
        // Walk row cells intersecting [e_lo, e_hi); bound_hi is descending in n.
        // First cell: smallest n with bound_hi[n+1] < e_hi.
        auto it = std::lower_bound(bound_hi.begin() + 1, bound_hi.end(), e_hi,
                                   [](double b, double v) { return b >= v; });
        int n = static_cast<int>(it - bound_hi.begin()) - 1;
        for (; n <= n_rows; ++n) {
            double cell_hi = bound_hi[static_cast<std::size_t>(n)];
            double cell_lo = (n == n_rows) ? 0.0 : bound_hi[static_cast<std::size_t>(n) + 1];
            double overlap = std::min(e_hi, cell_hi) - std::max(e_lo, cell_lo);
            if (overlap <= 0.0) {
                if (cell_hi <= e_lo) break;
                continue;
            }
            double frac = overlap / (e_hi - e_lo);
            if (n < n_rows) {  // row n_rows and beyond are discarded
                plan.span_row.push_back(static_cast<std::uint16_t>(n));
                plan.span_fraction.push_back(frac);
                plan.offsets[static_cast<std::size_t>(i) + 1]++;
            }
            if (cell_lo <= e_lo) break;
        }
    }
    for (std::size_t i = 1; i < plan.offsets.size(); ++i) plan.offsets[i] += plan.offsets[i - 1];
    return plan;
}

DispersedRows apply_dispersion(const DispersionPlan& plan, const std::vector<double>& photons_per_bin) {
    if (photons_per_bin.size() != static_cast<std::size_t>(plan.grid.n_bins)) {
        throw DataError("apply_dispersion: bin count mismatch");
    }
    std::vector<KahanSum> rows(static_cast<std::size_t>(plan.n_rows()));
    KahanSum discarded;
    for (int i = 0; i < plan.grid.n_bins; ++i) {
        double n_photons = photons_per_bin[static_cast<std::size_t>(i)];
        double assigned = 0.0;
        for (std::uint32_t s = plan.offsets[static_cast<std::size_t>(i)];
             s < plan.offsets[static_cast<std::size_t>(i) + 1]; ++s) {
            rows[plan.span_row[s]].add(n_photons * plan.span_fraction[s]);
            assigned += plan.span_fraction[s];
        }
        discarded.add(n_photons * (1.0 - assigned));
    }
    DispersedRows out;
    out.row_counts.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row_counts[r] = rows[r].value();
    out.discarded = discarded.value();
    return out;
}

DispersedRows disperse_spectrum_to_rows(const EnergySpectrum& spectrum, const PrismGeometry& geom) {
    auto plan = build_dispersion_plan(spectrum.grid, geom);
    return apply_dispersion(plan, spectrum.photons_per_bin);
}

}  // namespace msct
