#include "msct/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace msct {

namespace {

constexpr double kReferenceExposure = 0.010;  // s, matches the bundled spectrum normalization

double optical_weight(double e_kev, const DetectorConfig& cfg) {
    return e_kev * 1e-3 * cfg.scint_yield;  // optical photons per absorbed photon, before loss
}

/*** Stages (1)-(8) for one detector cell; returns electrons before
 * quantization. Draw order is fixed: per-bin Poisson in bin order, then the
 * optical Poisson, then gain, DSNU, readout. */
double noisy_electrons(const double* absorbed_expect, const double* opt_w, std::size_t n,
                       const DetectorConfig& cfg, std::mt19937_64& rng) {
    KahanSum optical_sum;
    for (std::size_t i = 0; i < n; ++i) {
        double lambda = absorbed_expect[i];
        long long x = 0;
        if (lambda > 0.0) {
            std::poisson_distribution<long long> poisson(lambda);
            x = poisson(rng);
        }
        if (x > 0) optical_sum.add(static_cast<double>(x) * opt_w[i]);
    }
    double optical_expect = optical_sum.value() / cfg.optical_loss;
    long long optical = 0;
    if (optical_expect > 0.0) {
        std::poisson_distribution<long long> poisson(optical_expect);
        optical = poisson(rng);
    }
    double electrons = static_cast<double>(optical) * cfg.qe + cfg.dark_current;
    if (cfg.prnu_sigma > 0.0) {
        std::normal_distribution<double> gain(1.0, cfg.prnu_sigma);
        electrons *= gain(rng);
    }
    if (cfg.dark_current > 0.0) {
        std::normal_distribution<double> dsnu(0.0, cfg.dark_current);
        electrons += dsnu(rng);
    }
    if (cfg.readout_sigma_sq > 0.0) {
        std::normal_distribution<double> readout(0.0, std::sqrt(cfg.readout_sigma_sq));
        electrons += readout(rng);
    }
    return electrons;
}

/*** Row-major view of a dispersion plan: per row, the contributing
 * (bin, fraction) fragments in ascending bin order. */
struct RowPlan {
    std::vector<std::uint32_t> offsets;  // n_rows + 1
    std::vector<std::uint32_t> bin;
    std::vector<double> fraction;
};

RowPlan transpose_plan(const DispersionPlan& plan) {
    RowPlan rp;
    int n_rows = plan.n_rows();
    rp.offsets.assign(static_cast<std::size_t>(n_rows) + 1, 0);
    for (std::size_t s = 0; s < plan.span_row.size(); ++s) ++rp.offsets[plan.span_row[s] + 1];
    for (int r = 0; r < n_rows; ++r) rp.offsets[r + 1] += rp.offsets[r];
    rp.bin.resize(plan.span_row.size());
    rp.fraction.resize(plan.span_row.size());
    std::vector<std::uint32_t> cursor(rp.offsets.begin(), rp.offsets.end() - 1);
    for (std::uint32_t b = 0; b + 1 < plan.offsets.size(); ++b) {
        for (std::uint32_t s = plan.offsets[b]; s < plan.offsets[b + 1]; ++s) {
            std::uint32_t at = cursor[plan.span_row[s]]++;
            rp.bin[at] = b;
            rp.fraction[at] = plan.span_fraction[s];
        }
    }
    return rp;
}

}  // namespace

std::uint16_t quantize_dn(double electrons, const DetectorConfig& cfg) {
    double dn = std::nearbyint(electrons / cfg.electrons_per_dn);
    dn = std::clamp(dn, 0.0, cfg.dn_max());
    return static_cast<std::uint16_t>(dn);
}

void DetectorConfig::validate() const {
    if (scint_thickness <= 0 || scint_yield <= 0 || optical_loss <= 0 || electrons_per_dn <= 0 ||
        exposure <= 0 || dark_current < 0 || prnu_sigma < 0 || readout_sigma_sq < 0)
        throw ConfigError("detector config fields must be positive");
    if (qe <= 0 || qe > 1) throw ConfigError("qe must lie in (0, 1]");
    if (prnu_sigma >= 0.1) throw ConfigError("prnu_sigma must be below 0.1");
    if (bit_depth < 1 || bit_depth > 16) throw ConfigError("bit_depth must lie in [1, 16]");
}

double scintillator_absorbed_fraction(double e_kev, const DetectorConfig& cfg, const MaterialTable& luag) {
    return 1.0 - std::exp(-linear_attenuation(luag, e_kev) * cfg.scint_thickness);
}

double expected_gray_value(const BinnedCounts& counts, const DetectorConfig& cfg, const MaterialTable& luag) {
    if (counts.energy_kev.size() != counts.counts.size())
        throw DataError("binned counts: energy/count size mismatch");
    KahanSum optical;
    for (std::size_t i = 0; i < counts.energy_kev.size(); ++i) {
        double e = counts.energy_kev[i];
        optical.add(counts.counts[i] * scintillator_absorbed_fraction(e, cfg, luag) * optical_weight(e, cfg));
    }
    return optical.value() / cfg.optical_loss * cfg.qe / cfg.electrons_per_dn;
}

std::uint16_t apply_noise(const BinnedCounts& counts, const DetectorConfig& cfg, const MaterialTable& luag,
                          std::uint64_t seed) {
    if (counts.energy_kev.size() != counts.counts.size())
        throw DataError("binned counts: energy/count size mismatch");
    std::size_t n = counts.energy_kev.size();
    std::vector<double> lambda(n), weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        double e = counts.energy_kev[i];
        lambda[i] = counts.counts[i] * scintillator_absorbed_fraction(e, cfg, luag);
        weight[i] = optical_weight(e, cfg);
    }
    std::mt19937_64 rng(seed);
    return quantize_dn(noisy_electrons(lambda.data(), weight.data(), n, cfg, rng), cfg);
}

ChainFactors build_chain_factors(const EnergyGrid& grid, const DetectorConfig& cfg, const MaterialTable& luag) {
    ChainFactors f;
    f.absorbed.resize(grid.n_bins);
    f.optical_per_photon.resize(grid.n_bins);
    for (int i = 0; i < grid.n_bins; ++i) {
        double e = grid.bin_center(i);
        f.absorbed[i] = scintillator_absorbed_fraction(e, cfg, luag);
        f.optical_per_photon[i] = optical_weight(e, cfg);
    }
    return f;
}

std::vector<double> flat_field(const EnergySpectrum& source, const PrismGeometry& geom, const DetectorConfig& cfg,
                               const MaterialTable& si, const MaterialTable& luag) {
    EnergySpectrum arriving = prism_transmission(source, geom, si);
    double exposure_scale = cfg.exposure / kReferenceExposure;
    DispersionPlan plan = build_dispersion_plan(source.grid, geom);
    ChainFactors factors = build_chain_factors(source.grid, cfg, luag);
    std::vector<KahanSum> dn(geom.n_rows);
    for (int b = 0; b < source.grid.n_bins; ++b) {
        double counts = arriving.photons_per_bin[b] * exposure_scale;
        if (counts <= 0.0) continue;
        double per_photon_dn = factors.absorbed[b] * factors.optical_per_photon[b] / cfg.optical_loss * cfg.qe /
                               cfg.electrons_per_dn;
        for (std::uint32_t s = plan.offsets[b]; s < plan.offsets[b + 1]; ++s)
            dn[plan.span_row[s]].add(counts * plan.span_fraction[s] * per_photon_dn);
    }
    std::vector<double> out(geom.n_rows);
    for (int r = 0; r < geom.n_rows; ++r) out[r] = dn[r].value();
    return out;
}

std::vector<SlicePair> simulate_dataset(const SimulationArgs& args) {
    if (!args.phantom || !args.source || !args.si || !args.mat1 || !args.mat2 || !args.luag)
        throw ConfigError("simulate_dataset: missing inputs");
    args.phantom->validate();
    args.geom.validate();
    args.det.validate();
    args.source->grid.validate();
    if (args.width <= 0 || args.n_angles <= 0 || args.pixel_pitch <= 0)
        throw ConfigError("simulate_dataset: width, n_angles, pixel_pitch must be positive");
    if (args.slices.empty()) throw ConfigError("simulate_dataset: no slices selected");
    for (int z : args.slices)
        if (z < 0 || z >= args.phantom->nz)
            throw ConfigError("simulate_dataset: slice index " + std::to_string(z) + " out of range");

    const EnergyGrid& grid = args.source->grid;
    EnergySpectrum arriving = prism_transmission(*args.source, args.geom, *args.si);
    double exposure_scale = args.det.exposure / kReferenceExposure;
    std::vector<double> incident(grid.n_bins);
    for (int b = 0; b < grid.n_bins; ++b) incident[b] = arriving.photons_per_bin[b] * exposure_scale;

    DispersionPlan plan = build_dispersion_plan(grid, args.geom);
    RowPlan row_plan = transpose_plan(plan);
    ChainFactors factors = build_chain_factors(grid, args.det, *args.luag);

    std::vector<double> mu1(grid.n_bins), mu2(grid.n_bins);
    for (int b = 0; b < grid.n_bins; ++b) {
        double e = grid.bin_center(b);
        mu1[b] = linear_attenuation(*args.mat1, e);
        mu2[b] = linear_attenuation(*args.mat2, e);
    }

    std::vector<double> flat = flat_field(*args.source, args.geom, args.det, *args.si, *args.luag);
    for (int r = 0; r < args.geom.n_rows; ++r)
        if (flat[r] <= 0.0)
            throw DataError("flat field is zero for row " + std::to_string(r) +
                            "; spectrum does not cover this row's energy cell");

    std::vector<double> e_mean(args.geom.n_rows);
    for (int r = 0; r < args.geom.n_rows; ++r) {
        KahanSum wsum, ewsum;
        for (std::uint32_t s = row_plan.offsets[r]; s < row_plan.offsets[r + 1]; ++s) {
            double w = incident[row_plan.bin[s]] * row_plan.fraction[s];
            wsum.add(w);
            ewsum.add(w * grid.bin_center(static_cast<int>(row_plan.bin[s])));
        }
        e_mean[r] = wsum.value() > 0 ? ewsum.value() / wsum.value()
                                     : 0.5 * (plan.cell_e_lo[r] + plan.cell_e_hi[r]);
    }

    std::vector<SlicePair> out(args.slices.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].slice_z = args.slices[i];
        for (SinogramStack* st : {&out[i].gt, &out[i].noisy}) {
            st->width = args.width;
            st->n_rows = args.geom.n_rows;
            st->n_angles = args.n_angles;
            st->row_e_min = plan.cell_e_lo;
            st->row_e_max = plan.cell_e_hi;
            st->row_e_mean = e_mean;
            st->flat_field = flat;
            st->preset = args.preset_name;
            st->seed = args.seed;
        }
        out[i].gt.dtype = StackDType::f32;
        out[i].noisy.dtype = StackDType::u16;
        out[i].gt.allocate();
        out[i].noisy.allocate();
    }

    std::size_t n_tasks = out.size() * static_cast<std::size_t>(args.n_angles);
    parallel_for(n_tasks, args.threads, [&](std::size_t task) {
        std::size_t si_idx = task / static_cast<std::size_t>(args.n_angles);
        int a = static_cast<int>(task % static_cast<std::size_t>(args.n_angles));
        SlicePair& pair = out[si_idx];
        double angle = std::numbers::pi * static_cast<double>(a) / static_cast<double>(args.n_angles);
        PathLengthProjection proj =
            longitudinal_projection(*args.phantom, pair.slice_z, angle, args.width, args.pixel_pitch);

        std::vector<double> absorbed_expect(grid.n_bins);
        std::vector<double> frag_lambda, frag_weight;
        for (int p = 0; p < args.width; ++p) {
            double l1 = proj.l1[p], l2 = proj.l2[p];
            if (l1 == 0.0 && l2 == 0.0) {
                for (int b = 0; b < grid.n_bins; ++b) absorbed_expect[b] = incident[b] * factors.absorbed[b];
            } else {
                for (int b = 0; b < grid.n_bins; ++b)
                    absorbed_expect[b] =
                        incident[b] * std::exp(-mu1[b] * l1 - mu2[b] * l2) * factors.absorbed[b];
            }
            std::mt19937_64 rng(hash_combine(
                hash_combine(hash_combine(args.seed, static_cast<std::uint64_t>(pair.slice_z)),
                             static_cast<std::uint64_t>(a)),
                static_cast<std::uint64_t>(p)));
            for (int r = 0; r < args.geom.n_rows; ++r) {
                std::uint32_t lo = row_plan.offsets[r], hi = row_plan.offsets[r + 1];
                frag_lambda.resize(hi - lo);
                frag_weight.resize(hi - lo);
                KahanSum gt_optical;
                for (std::uint32_t s = lo; s < hi; ++s) {
                    std::uint32_t b = row_plan.bin[s];
                    double lam = absorbed_expect[b] * row_plan.fraction[s];
                    frag_lambda[s - lo] = lam;
                    frag_weight[s - lo] = factors.optical_per_photon[b];
                    gt_optical.add(lam * factors.optical_per_photon[b]);
                }
                double gt_dn =
                    gt_optical.value() / args.det.optical_loss * args.det.qe / args.det.electrons_per_dn;
                std::size_t idx = pair.gt.index(p, r, a);
                pair.gt.f32[idx] = static_cast<float>(gt_dn);
                pair.noisy.u16[idx] = quantize_dn(
                    noisy_electrons(frag_lambda.data(), frag_weight.data(), frag_lambda.size(), args.det, rng),
                    args.det);
            }
        }
    });
    return out;
}

}  // namespace msct
