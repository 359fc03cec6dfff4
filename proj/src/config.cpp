#include "msct/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <numbers>

#include "json.hpp"

namespace msct {

namespace {

using nlohmann::json;

/*** Tracks which keys a section consumed; leftovers are config errors. */
class View {
public:
    View(const json& j, std::string where) : j_(&j), where_(std::move(where)) {
        if (!j_->is_object()) throw ConfigError(where_ + ": expected an object");
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_->contains(key);
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_->contains(key) ? &j_->at(key) : nullptr;
    }

    double num(const char* key, double def) {
        seen_.insert(key);
        if (!j_->contains(key)) return def;
        const json& v = j_->at(key);
        if (!v.is_number()) throw ConfigError(where_ + "." + key + ": expected a number");
        return v.get<double>();
    }

    int integer(const char* key, int def) {
        seen_.insert(key);
        if (!j_->contains(key)) return def;
        const json& v = j_->at(key);
        if (!v.is_number_integer()) throw ConfigError(where_ + "." + key + ": expected an integer");
        return v.get<int>();
    }

    std::uint64_t u64(const char* key, std::uint64_t def) {
        seen_.insert(key);
        if (!j_->contains(key)) return def;
        const json& v = j_->at(key);
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0))
            throw ConfigError(where_ + "." + key + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const char* key, bool def) {
        seen_.insert(key);
        if (!j_->contains(key)) return def;
        const json& v = j_->at(key);
        if (!v.is_boolean()) throw ConfigError(where_ + "." + key + ": expected a boolean");
        return v.get<bool>();
    }

    std::string str(const char* key, std::string def) {
        seen_.insert(key);
        if (!j_->contains(key)) return def;
        const json& v = j_->at(key);
        if (!v.is_string()) throw ConfigError(where_ + "." + key + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<int> int_array(const char* key, std::vector<int> def) {
        seen_.insert(key);
        if (!j_->contains(key)) return def;
        const json& v = j_->at(key);
        if (!v.is_array()) throw ConfigError(where_ + "." + key + ": expected an array");
        std::vector<int> out;
        for (const json& e : v) {
            if (!e.is_number_integer())
                throw ConfigError(where_ + "." + key + ": expected integer elements");
            out.push_back(e.get<int>());
        }
        return out;
    }

    void done() const {
        for (const auto& item : j_->items())
            if (!seen_.count(item.key()))
                throw ConfigError(where_ + ": unknown key \"" + item.key() + "\"");
    }

private:
    const json* j_;
    std::string where_;
    std::set<std::string> seen_;
};

void parse_geometry(const json& j, GeometryConfig& g) {
    View v(j, "geometry");
    g.preset = v.str("preset", g.preset);
    g.anchor_row = v.num("anchor_row", g.anchor_row);
    g.anchor_energy_kev = v.num("anchor_energy_kev", g.anchor_energy_kev);
    if ((g.has_alpha = v.has("alpha_deg"))) g.alpha_deg = v.num("alpha_deg", 0.0);
    if ((g.has_n_pa = v.has("n_pa"))) g.n_pa = v.integer("n_pa", 0);
    if ((g.has_y = v.has("y"))) g.y = v.num("y", 0.0);
    if ((g.has_d = v.has("d"))) g.d = v.num("d", 0.0);
    if ((g.has_h_pixel = v.has("h_pixel"))) g.h_pixel = v.num("h_pixel", 0.0);
    v.done();
}

void parse_grid(const json& j, EnergyGrid& g) {
    View v(j, "grid");
    g.e_min = v.num("e_min_kev", g.e_min);
    g.pitch = v.num("pitch_kev", g.pitch);
    g.n_bins = v.integer("n_bins", g.n_bins);
    v.done();
}

void parse_detector(const json& j, DetectorConfig& d) {
    View v(j, "detector");
    d.scint_thickness = v.num("scint_thickness", d.scint_thickness);
    d.scint_yield = v.num("scint_yield", d.scint_yield);
    d.optical_loss = v.num("optical_loss", d.optical_loss);
    d.qe = v.num("qe", d.qe);
    d.electrons_per_dn = v.num("electrons_per_dn", d.electrons_per_dn);
    d.exposure = v.num("exposure", d.exposure);
    d.dark_current = v.num("dark_current", d.dark_current);
    d.prnu_sigma = v.num("prnu_sigma", d.prnu_sigma);
    d.readout_sigma_sq = v.num("readout_sigma_sq", d.readout_sigma_sq);
    d.bit_depth = v.integer("bit_depth", d.bit_depth);
    v.done();
}

void parse_materials(const json& j, PipelineConfig& c) {
    View v(j, "materials");
    c.si_path = v.str("si", c.si_path);
    c.luag_path = v.str("luag", c.luag_path);
    c.body_path = v.str("body", c.body_path);
    c.insert_path = v.str("insert", c.insert_path);
    v.done();
}

void parse_phantom(const json& j, PhantomConfig& p) {
    View v(j, "phantom");
    p.kind = v.str("kind", p.kind);
    p.seed = v.u64("seed", p.seed);
    p.nx = v.integer("nx", p.nx);
    p.ny = v.integer("ny", p.ny);
    p.nz = v.integer("nz", p.nz);
    p.voxel_size = v.num("voxel_size_m", p.voxel_size);
    p.import_body = v.str("import_body", p.import_body);
    p.import_insert = v.str("import_insert", p.import_insert);
    p.material1 = v.str("material1", p.material1);
    p.material2 = v.str("material2", p.material2);
    v.done();
}

void parse_dataset(const json& j, DatasetConfig& d) {
    View v(j, "dataset");
    d.width = v.integer("width", d.width);
    d.rows = v.integer("rows", d.rows);
    d.angles = v.integer("angles", d.angles);
    d.slices = v.int_array("slices", d.slices);
    d.train_slices = v.int_array("train_slices", d.train_slices);
    d.val_slices = v.int_array("val_slices", d.val_slices);
    d.test_slices = v.int_array("test_slices", d.test_slices);
    d.pixel_pitch = v.num("pixel_pitch_m", d.pixel_pitch);
    v.done();
}

void parse_train(const json& j, TrainConfig& t, std::uint64_t global_seed) {
    View v(j, "train");
    t.lr_videonet = v.num("lr_videonet", t.lr_videonet);
    bool has_hsinet = v.has("lr_hsinet");
    t.lr_hsinet = v.num("lr_hsinet", t.lr_hsinet);
    // the combiner rate tracks lr_hsinet/10 unless given explicitly
    if (v.has("lr_combiner")) t.lr_combiner = v.num("lr_combiner", t.lr_combiner);
    else if (has_hsinet) t.lr_combiner = t.lr_hsinet / 10.0;
    t.lr_dncnn = v.num("lr_dncnn", t.lr_dncnn);
    t.n_nearest_neighbors = v.integer("n_nearest_neighbors", t.n_nearest_neighbors);
    t.k_adjacent_bands = v.integer("k_adjacent_bands", t.k_adjacent_bands);
    t.n_denoise_blocks = v.integer("n_denoise_blocks", t.n_denoise_blocks);
    t.n_octave_blocks = v.integer("n_octave_blocks", t.n_octave_blocks);
    t.alpha_octave = v.num("alpha_octave", t.alpha_octave);
    t.batch_size = v.integer("batch_size", t.batch_size);
    t.max_epochs = v.integer("max_epochs", t.max_epochs);
    t.patience = v.integer("patience", t.patience);
    t.seed = v.u64("seed", hash_combine(global_seed, fnv1a64("train")));
    t.steps_per_epoch = v.integer("steps_per_epoch", t.steps_per_epoch);
    t.val_stride = v.integer("val_stride", t.val_stride);
    t.dncnn_patch = v.integer("dncnn_patch", t.dncnn_patch);
    v.done();
}

void parse_networks(const json& j, NetworkWidths& n) {
    View v(j, "networks");
    if (const json* h = v.child("hsinet")) {
        View hv(*h, "networks.hsinet");
        n.spatial_channels = hv.integer("spatial_channels", n.spatial_channels);
        n.spectral_channels = hv.integer("spectral_channels", n.spectral_channels);
        n.trunk_channels = hv.integer("trunk_channels", n.trunk_channels);
        n.cbam_reduction = hv.integer("cbam_reduction", n.cbam_reduction);
        hv.done();
    }
    if (const json* w = v.child("videonet")) {
        View wv(*w, "networks.videonet");
        n.patch_len = wv.integer("patch_len", n.patch_len);
        n.angle_window = wv.integer("angle_window", n.angle_window);
        n.offsets = wv.int_array("offsets", n.offsets);
        n.sep_channels = wv.integer("sep_channels", n.sep_channels);
        n.n_sepconv = wv.integer("n_sepconv", n.n_sepconv);
        n.conv2d_channels = wv.integer("conv2d_channels", n.conv2d_channels);
        n.conv1d_channels = wv.integer("conv1d_channels", n.conv1d_channels);
        n.n_conv1d = wv.integer("n_conv1d", n.n_conv1d);
        wv.done();
    }
    if (const json* d = v.child("dncnn")) {
        View dv(*d, "networks.dncnn");
        n.dncnn_channels = dv.integer("channels", n.dncnn_channels);
        n.dncnn_hidden = dv.integer("n_hidden", n.dncnn_hidden);
        dv.done();
    }
    v.done();
}

void parse_denoise(const json& j, DenoiseConfig& d) {
    View v(j, "denoise");
    d.method = v.str("method", d.method);
    d.nlm_patch_radius = v.integer("nlm_patch_radius", d.nlm_patch_radius);
    d.nlm_search_radius = v.integer("nlm_search_radius", d.nlm_search_radius);
    d.nlm_h = v.num("nlm_h", d.nlm_h);
    d.tv_lambda = v.num("tv_lambda", d.tv_lambda);
    d.tv_iters = v.integer("tv_iters", d.tv_iters);
    v.done();
}

void parse_metrics(const json& j, MetricsConfig& m) {
    View v(j, "metrics");
    m.selection.with_psnr = v.boolean("psnr", m.selection.with_psnr);
    m.selection.with_ssim = v.boolean("ssim", m.selection.with_ssim);
    m.selection.with_ms_ssim = v.boolean("ms_ssim", m.selection.with_ms_ssim);
    m.selection.with_nrmse = v.boolean("nrmse", m.selection.with_nrmse);
    m.selection.ms_ssim_levels = v.integer("ms_ssim_levels", m.selection.ms_ssim_levels);
    m.selection.peak = v.num("peak", m.selection.peak);
    m.selection.nrmse_mean_norm = v.boolean("nrmse_mean_norm", m.selection.nrmse_mean_norm);
    std::vector<int> rr = v.int_array("row_range", {});
    if (!rr.empty()) {
        if (rr.size() != 2) throw ConfigError("metrics.row_range: expected [lo, hi]");
        m.row_lo = rr[0];
        m.row_hi = rr[1];
    }
    v.done();
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& config_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    PipelineConfig c;
    c.config_dir = config_dir;
    c.config_hash = fnv1a64(json_text);
    View v(j, "config");
    c.seed = v.u64("seed", c.seed);
    c.threads = v.integer("threads", c.threads);
    c.output_dir = v.str("output_dir", c.output_dir);
    c.spectrum_path = v.str("spectrum", c.spectrum_path);
    if (const json* s = v.child("geometry")) parse_geometry(*s, c.geometry);
    if (const json* s = v.child("grid")) parse_grid(*s, c.grid);
    if (const json* s = v.child("detector")) parse_detector(*s, c.detector);
    if (const json* s = v.child("materials")) parse_materials(*s, c);
    if (const json* s = v.child("phantom")) parse_phantom(*s, c.phantom);
    if (const json* s = v.child("dataset")) parse_dataset(*s, c.dataset);
    bool had_train = false;
    if (const json* s = v.child("train")) {
        parse_train(*s, c.train, c.seed);
        had_train = true;
    }
    if (!had_train) c.train.seed = hash_combine(c.seed, fnv1a64("train"));
    if (const json* s = v.child("networks")) parse_networks(*s, c.networks);
    if (const json* s = v.child("denoise")) parse_denoise(*s, c.denoise);
    if (const json* s = v.child("metrics")) parse_metrics(*s, c.metrics);
    v.done();
    if (c.train.threads == 0) c.train.threads = c.threads;
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    std::string dir = std::filesystem::path(path).parent_path().string();
    return parse_pipeline_config(ss.str(), dir);
}

std::string resolve_path(const PipelineConfig& cfg, const std::string& path) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute() || cfg.config_dir.empty()) return path;
    return (std::filesystem::path(cfg.config_dir) / p).string();
}

void PipelineConfig::validate() const {
    grid.validate();
    detector.validate();
    preset_geometry(geometry.preset);  // throws on unknown preset
    if (geometry.anchor_row <= 0.0) throw ConfigError("geometry.anchor_row must be positive");
    if (geometry.anchor_energy_kev <= 0.0) throw ConfigError("geometry.anchor_energy_kev must be positive");

    if (phantom.kind != "procedural" && phantom.kind != "empty" && phantom.kind != "import")
        throw ConfigError("phantom.kind must be procedural, empty, or import; got \"" + phantom.kind + "\"");
    if (phantom.nx < 4 || phantom.ny < 4 || phantom.nz < 1)
        throw ConfigError("phantom dims too small");
    if (phantom.voxel_size <= 0.0) throw ConfigError("phantom.voxel_size_m must be positive");
    if (phantom.kind == "import" && (phantom.import_body.empty() || phantom.import_insert.empty()))
        throw ConfigError("phantom.kind import needs import_body and import_insert paths");

    if (dataset.width < 8) throw ConfigError("dataset.width must be >= 8");
    if (dataset.rows < 1) throw ConfigError("dataset.rows must be >= 1");
    if (dataset.angles < 1) throw ConfigError("dataset.angles must be >= 1");
    if (dataset.pixel_pitch <= 0.0) throw ConfigError("dataset.pixel_pitch_m must be positive");
    if (dataset.slices.empty()) throw ConfigError("dataset.slices must not be empty");
    for (int z : dataset.slices)
        if (z < 0 || z >= phantom.nz)
            throw ConfigError("dataset.slices entry " + std::to_string(z) + " outside phantom nz");
    auto check_split = [&](const std::vector<int>& part, const char* name) {
        if (part.empty()) throw ConfigError(std::string("dataset.") + name + " must not be empty");
        for (int i : part)
            if (i < 0 || i >= static_cast<int>(dataset.slices.size()))
                throw ConfigError(std::string("dataset.") + name + " index " + std::to_string(i) +
                                  " outside the slices list");
    };
    check_split(dataset.train_slices, "train_slices");
    check_split(dataset.val_slices, "val_slices");
    check_split(dataset.test_slices, "test_slices");
    std::set<int> seen;
    for (const auto* part : {&dataset.train_slices, &dataset.val_slices, &dataset.test_slices})
        for (int i : *part)
            if (!seen.insert(i).second)
                throw ConfigError("dataset slice splits overlap at index " + std::to_string(i) +
                                  " (no slice leakage)");

    train.validate();
    if (train.k_adjacent_bands > dataset.rows)
        throw ConfigError("train.k_adjacent_bands exceeds dataset.rows");

    if (networks.spatial_channels < 1 || networks.spectral_channels < 1 ||
        networks.trunk_channels < 2 || networks.cbam_reduction < 1)
        throw ConfigError("networks.hsinet: channel counts too small");
    if (networks.patch_len < 3 || networks.patch_len % 2 == 0)
        throw ConfigError("networks.videonet.patch_len must be odd and >= 3");
    if (networks.patch_len >= dataset.width)
        throw ConfigError("networks.videonet.patch_len must be < dataset.width");
    if (networks.angle_window < 1) throw ConfigError("networks.videonet.angle_window must be >= 1");
    if (networks.offsets.empty()) throw ConfigError("networks.videonet.offsets must not be empty");
    for (int o : networks.offsets)
        if (o < 0 || o >= networks.patch_len)
            throw ConfigError("networks.videonet.offsets entries must lie in [0, patch_len)");
    if (networks.sep_channels < 1 || networks.n_sepconv < 1 || networks.conv2d_channels < 1 ||
        networks.conv1d_channels < 1 || networks.n_conv1d < 2)
        throw ConfigError("networks.videonet: channel/depth counts too small");
    if (networks.dncnn_channels < 1 || networks.dncnn_hidden < 1)
        throw ConfigError("networks.dncnn: channel/depth counts too small");

    static const std::set<std::string> kMethods{"nlm", "tv", "hsinet", "videonet", "combined", "dncnn"};
    if (!kMethods.count(denoise.method))
        throw ConfigError("denoise.method \"" + denoise.method + "\" not one of nlm/tv/hsinet/videonet/combined/dncnn");
    if (denoise.nlm_patch_radius < 1 || denoise.nlm_search_radius < 1 || denoise.nlm_h <= 0.0)
        throw ConfigError("denoise: NLM parameters out of range");
    if (denoise.tv_lambda <= 0.0 || denoise.tv_iters < 1)
        throw ConfigError("denoise: TV parameters out of range");

    if (metrics.selection.ms_ssim_levels < 1) throw ConfigError("metrics.ms_ssim_levels must be >= 1");
    if (metrics.selection.peak <= 0.0) throw ConfigError("metrics.peak must be positive");
    if ((metrics.row_lo < 0) != (metrics.row_hi < 0))
        throw ConfigError("metrics.row_range needs both ends");
    if (metrics.row_lo >= 0 &&
        (metrics.row_lo > metrics.row_hi || metrics.row_hi >= dataset.rows))
        throw ConfigError("metrics.row_range outside [0, dataset.rows)");

    if (threads < 0) throw ConfigError("threads must be >= 0");
}

PrismGeometry PipelineConfig::make_geometry() const {
    PrismGeometry g = preset_geometry(geometry.preset);
    if (geometry.has_alpha) g.alpha_p = geometry.alpha_deg * std::numbers::pi / 180.0;
    if (geometry.has_n_pa) g.n_pa = geometry.n_pa;
    if (geometry.has_y) g.y = geometry.y;
    if (geometry.has_d) g.d = geometry.d;
    if (geometry.has_h_pixel) g.h_pixel = geometry.h_pixel;
    g.n_rows = dataset.rows;
    g.validate();
    g.delta = calibrate_delta(g, geometry.anchor_energy_kev, geometry.anchor_row);
    return g;
}

HsiNetConfig PipelineConfig::make_hsinet() const {
    HsiNetConfig h;
    h.k_bands = train.k_adjacent_bands;
    h.spatial_channels = networks.spatial_channels;
    h.spectral_channels = networks.spectral_channels;
    h.trunk_channels = networks.trunk_channels;
    h.n_blocks = train.n_denoise_blocks;
    h.alpha = train.alpha_octave;
    h.cbam_reduction = networks.cbam_reduction;
    return h;
}

VideoNetConfig PipelineConfig::make_videonet() const {
    VideoNetConfig v;
    v.patchcraft.patch_len = networks.patch_len;
    v.patchcraft.n_neighbors = train.n_nearest_neighbors;
    v.patchcraft.angle_window = networks.angle_window;
    v.patchcraft.offsets = networks.offsets;
    v.sep_channels = networks.sep_channels;
    v.n_sepconv = networks.n_sepconv;
    v.conv2d_channels = networks.conv2d_channels;
    v.conv1d_channels = networks.conv1d_channels;
    v.n_conv1d = networks.n_conv1d;
    return v;
}

DnCnnConfig PipelineConfig::make_dncnn() const {
    DnCnnConfig d;
    d.channels = networks.dncnn_channels;
    d.n_hidden = networks.dncnn_hidden;
    return d;
}

std::vector<int> PipelineConfig::metric_rows() const {
    std::vector<int> out;
    if (metrics.row_lo < 0) return out;
    for (int r = metrics.row_lo; r <= metrics.row_hi; ++r) out.push_back(r);
    return out;
}

}  // namespace msct
