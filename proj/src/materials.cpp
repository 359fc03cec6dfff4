#include "msct/materials.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace msct {

void EnergyGrid::validate() const {
    if (pitch <= 0.0) throw ConfigError("energy grid pitch must be positive");
    if (n_bins < 1) throw ConfigError("energy grid needs at least one bin");
    if (e_min <= 0.0) throw ConfigError("energy grid must start above 0 keV");
}

double EnergySpectrum::total() const {
    KahanSum s;
    for (double v : photons_per_bin) s.add(v);
    return s.value();
}

namespace {

// Parses two-column numeric text, '#' comments and blank lines allowed.
std::vector<std::pair<double, double>> parse_two_column(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::pair<double, double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a)) continue;  // blank or comment-only
        if (!(ls >> b)) {
            throw DataError(path + ":" + std::to_string(lineno) + ": expected two numeric columns");
        }
        double extra;
        if (ls >> extra) {
            throw DataError(path + ":" + std::to_string(lineno) + ": more than two columns");
        }
        rows.emplace_back(a, b);
    }
    return rows;
}

}  // namespace

MaterialTable load_material_table(const std::string& path, const std::string& name, double density) {
    auto rows = parse_two_column(path);
    if (rows.size() < 2) throw DataError(path + ": material table needs at least 2 rows");
    MaterialTable t;
    t.name = name.empty() ? path : name;
    t.density = density;
    t.energy.reserve(rows.size());
    t.mu.reserve(rows.size());
    for (auto& [e, mu] : rows) {
        if (!t.energy.empty() && e <= t.energy.back()) {
            throw DataError(path + ": non-monotone energy grid at " + std::to_string(e) + " keV");
        }
        if (mu <= 0.0) {
            throw DataError(path + ": non-positive attenuation at " + std::to_string(e) + " keV");
        }
        t.energy.push_back(e);
        t.mu.push_back(mu);
    }
    return t;
}

double linear_attenuation(const MaterialTable& table, double e_kev) {
    if (e_kev < table.e_lo() || e_kev > table.e_hi()) {
        throw DataError(table.name + ": energy " + std::to_string(e_kev) +
                        " keV outside sampled range [" + std::to_string(table.e_lo()) + ", " +
                        std::to_string(table.e_hi()) + "]");
    }
    auto it = std::lower_bound(table.energy.begin(), table.energy.end(), e_kev);
    std::size_t hi = static_cast<std::size_t>(it - table.energy.begin());
    if (hi < table.energy.size() && table.energy[hi] == e_kev) return table.mu[hi];
    std::size_t lo = hi - 1;
    // log-log interpolation: attenuation is near power-law between edges
    double t = (std::log(e_kev) - std::log(table.energy[lo])) /
               (std::log(table.energy[hi]) - std::log(table.energy[lo]));
    return std::exp((1.0 - t) * std::log(table.mu[lo]) + t * std::log(table.mu[hi]));
}

EnergySpectrum load_spectrum(const std::string& path, const EnergyGrid& grid) {
    grid.validate();
    auto rows = parse_two_column(path);
    if (rows.size() < 2) throw DataError(path + ": spectrum needs at least 2 samples");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].first <= rows[i - 1].first) {
            throw DataError(path + ": non-monotone spectrum energies");
        }
    }
    EnergySpectrum s;
    s.grid = grid;
    s.photons_per_bin.resize(static_cast<std::size_t>(grid.n_bins));
    const double scale = grid.pitch / 0.010;  // file values are per 10 eV reference bin
    std::size_t k = 0;
    for (int i = 0; i < grid.n_bins; ++i) {
        double e = grid.bin_center(i);
        if (e < rows.front().first || e > rows.back().first) {
            throw DataError(path + ": grid bin center " + std::to_string(e) +
                            " keV outside spectrum sample span");
        }
        while (k + 2 < rows.size() && rows[k + 1].first < e) ++k;
        double e0 = rows[k].first, e1 = rows[k + 1].first;
        double t = (e - e0) / (e1 - e0);
        double v = (1.0 - t) * rows[k].second + t * rows[k + 1].second;
        if (!std::isfinite(v)) throw DataError(path + ": non-finite spectrum value");
        s.photons_per_bin[static_cast<std::size_t>(i)] = std::max(0.0, v) * scale;
    }
    return s;
}

double delta_si(const DeltaModel& model, double e_kev) {
    if (e_kev <= 0.0) throw NumericError("delta_si: non-positive energy");
    if (model.c_delta <= 0.0) throw NumericError("delta model is uncalibrated (c_delta <= 0)");
    return model.c_delta / (e_kev * e_kev);
}

}  // namespace msct
