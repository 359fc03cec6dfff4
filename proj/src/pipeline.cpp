#include "msct/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include "msct/train.hpp"
#include "msct/weights_io.hpp"

namespace msct {

namespace {

namespace fs = std::filesystem;

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

struct Manifest {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::uint64_t>> inputs;
    std::vector<std::pair<std::string, std::uint64_t>> outputs;

    void write(const std::string& path) const {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw DataError("cannot open for writing: " + path);
        os << "tool=" << kToolVersion << '\n';
        os << "command=" << command << '\n';
        os << "config_fnv=" << hex64(config_hash) << '\n';
        os << "seed=" << seed << '\n';
        for (const auto& [p, h] : inputs) os << "input=" << p << " fnv=" << hex64(h) << '\n';
        for (const auto& [p, h] : outputs) os << "output=" << p << " fnv=" << hex64(h) << '\n';
        if (!os) throw DataError("write failed: " + path);
    }
};

void ensure_outdir(const PipelineConfig& cfg) {
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw DataError("cannot create output dir " + cfg.output_dir + ": " + ec.message());
}

/*** Output entry: basename + hash of the just-written file (and its sidecar
 * when one exists). */
void note_output(Manifest& m, const std::string& path) {
    m.outputs.emplace_back(fs::path(path).filename().string(), file_fnv(path));
    std::string meta = path + ".meta";
    if (fs::exists(meta)) m.outputs.emplace_back(fs::path(meta).filename().string(), file_fnv(meta));
}

SinogramStack read_stack_checked(const PipelineConfig& cfg, const std::string& name, const char* hint) {
    std::string path = artifact_path(cfg, name);
    if (!fs::exists(path))
        throw DataError("missing " + path + "; " + hint);
    return read_stack(path);
}

int slice_count(const PipelineConfig& cfg) { return static_cast<int>(cfg.dataset.slices.size()); }

TrainPair load_pair(const PipelineConfig& cfg, int k, const char* hint) {
    SinogramStack noisy = read_stack_checked(cfg, noisy_stack_name(k), hint);
    SinogramStack gt = read_stack_checked(cfg, gt_stack_name(k), hint);
    return {normalize_per_line(noisy), normalize_per_line(gt)};
}

TrainSet load_train_set(const PipelineConfig& cfg, const char* hint) {
    TrainSet ts;
    for (int k : cfg.dataset.train_slices) ts.train.push_back(load_pair(cfg, k, hint));
    for (int k : cfg.dataset.val_slices) ts.val.push_back(load_pair(cfg, k, hint));
    return ts;
}

std::uint64_t model_seed(const PipelineConfig& cfg, const std::string& model) {
    return hash_combine(cfg.seed, fnv1a64("model:" + model));
}

void save_model(const PipelineConfig& cfg, Manifest& m, const std::string& model,
                const std::string& arch, const std::vector<Param*>& params,
                const std::vector<LossRecord>& hist) {
    std::string wpath = artifact_path(cfg, weights_name(model));
    std::string lpath = artifact_path(cfg, loss_name(model));
    write_weights(wpath, arch, params);
    write_loss_history(lpath, hist);
    note_output(m, wpath);
    note_output(m, lpath);
    std::cout << model << ": " << hist.size() << " epochs, best val MSE restored; weights -> "
              << wpath << '\n';
}

void require_weights(const PipelineConfig& cfg, const std::string& model) {
    std::string path = artifact_path(cfg, weights_name(model));
    if (!fs::exists(path))
        throw DataError("missing frozen weights for " + model + ": " + path +
                        "; run `train --model " + model + "` first");
}

}  // namespace

std::string artifact_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.output_dir) / name).string();
}

std::string gt_stack_name(int k) { return "gt_slice" + std::to_string(k) + ".stk"; }
std::string noisy_stack_name(int k) { return "noisy_slice" + std::to_string(k) + ".stk"; }
std::string denoised_stack_name(const std::string& method, int k) {
    return "denoised_" + method + "_slice" + std::to_string(k) + ".stk";
}
std::string weights_name(const std::string& model) { return "weights_" + model + ".wts"; }
std::string loss_name(const std::string& model) { return "loss_" + model + ".csv"; }

std::uint64_t file_fnv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (is.read(buf, sizeof buf) || is.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(is.gcount()), h);
    return h;
}

std::uint64_t realization_seed(const PipelineConfig& cfg, int i) {
    return i == 0 ? cfg.seed : hash_combine(cfg.seed, 0xA5A50000ULL + static_cast<std::uint64_t>(i));
}

PipelineContext load_context(const PipelineConfig& cfg) {
    PipelineContext ctx;
    ctx.cfg = cfg;
    auto note = [&](const std::string& path) { ctx.input_hashes.emplace_back(path, file_fnv(path)); };

    std::string spath = resolve_path(cfg, cfg.spectrum_path);
    ctx.source = load_spectrum(spath, cfg.grid);
    note(spath);
    std::string si_p = resolve_path(cfg, cfg.si_path), luag_p = resolve_path(cfg, cfg.luag_path);
    std::string body_p = resolve_path(cfg, cfg.body_path), ins_p = resolve_path(cfg, cfg.insert_path);
    ctx.si = load_material_table(si_p, "si");
    ctx.luag = load_material_table(luag_p, "luag");
    ctx.body = load_material_table(body_p, cfg.phantom.material1);
    ctx.insert = load_material_table(ins_p, cfg.phantom.material2);
    note(si_p);
    note(luag_p);
    note(body_p);
    note(ins_p);

    const PhantomConfig& ph = cfg.phantom;
    if (ph.kind == "procedural") {
        ctx.phantom = generate_procedural_phantom(ph.seed, ph.nx, ph.ny, ph.nz, ph.voxel_size);
    } else if (ph.kind == "empty") {
        ctx.phantom.nx = ph.nx;
        ctx.phantom.ny = ph.ny;
        ctx.phantom.nz = ph.nz;
        ctx.phantom.voxel_size = ph.voxel_size;
        ctx.phantom.volume1.assign(ctx.phantom.n_voxels(), 0);
        ctx.phantom.volume2.assign(ctx.phantom.n_voxels(), 0);
    } else {  // import
        std::string b = resolve_path(cfg, ph.import_body), i = resolve_path(cfg, ph.import_insert);
        ctx.phantom.nx = ph.nx;
        ctx.phantom.ny = ph.ny;
        ctx.phantom.nz = ph.nz;
        ctx.phantom.voxel_size = ph.voxel_size;
        ctx.phantom.volume1 = import_voxel_volume(b, ph.nx, ph.ny, ph.nz);
        ctx.phantom.volume2 = import_voxel_volume(i, ph.nx, ph.ny, ph.nz);
        note(b);
        note(i);
    }
    ctx.phantom.material1 = ph.material1;
    ctx.phantom.material2 = ph.material2;
    ctx.phantom.validate();

    ctx.geom = cfg.make_geometry();
    return ctx;
}

std::vector<SlicePair> simulate_slices(const PipelineContext& ctx, const std::vector<int>& z_slices,
                                       std::uint64_t seed) {
    SimulationArgs args;
    args.phantom = &ctx.phantom;
    args.slices = z_slices;
    args.geom = ctx.geom;
    args.det = ctx.cfg.detector;
    args.source = &ctx.source;
    args.si = &ctx.si;
    args.mat1 = &ctx.body;
    args.mat2 = &ctx.insert;
    args.luag = &ctx.luag;
    args.width = ctx.cfg.dataset.width;
    args.pixel_pitch = ctx.cfg.dataset.pixel_pitch;
    args.n_angles = ctx.cfg.dataset.angles;
    args.seed = seed;
    args.threads = ctx.cfg.threads;
    args.preset_name = ctx.cfg.geometry.preset;
    return simulate_dataset(args);
}

void cmd_simulate(const PipelineConfig& cfg) {
    PipelineContext ctx = load_context(cfg);
    ensure_outdir(cfg);
    auto pairs = simulate_slices(ctx, cfg.dataset.slices, cfg.seed);

    Manifest m;
    m.command = "simulate";
    m.config_hash = cfg.config_hash;
    m.seed = cfg.seed;
    m.inputs = ctx.input_hashes;
    for (int k = 0; k < slice_count(cfg); ++k) {
        std::string gt_p = artifact_path(cfg, gt_stack_name(k));
        std::string no_p = artifact_path(cfg, noisy_stack_name(k));
        write_stack(gt_p, pairs[static_cast<std::size_t>(k)].gt);
        write_stack(no_p, pairs[static_cast<std::size_t>(k)].noisy);
        note_output(m, gt_p);
        note_output(m, no_p);
    }
    m.write(artifact_path(cfg, "manifest_simulate.txt"));
    std::cout << "simulated " << slice_count(cfg) << " slices (" << cfg.dataset.width << "x"
              << cfg.dataset.rows << "x" << cfg.dataset.angles << ") -> " << cfg.output_dir << '\n';
}

void cmd_train(const PipelineConfig& cfg, const std::string& model) {
    static const std::set<std::string> kModels{"hsinet", "videonet", "combiner", "dncnn"};
    if (!kModels.count(model))
        throw ConfigError("unknown model \"" + model + "\"; expected hsinet/videonet/combiner/dncnn");
    ensure_outdir(cfg);
    const char* hint = "run `simulate` first";
    TrainSet ts = load_train_set(cfg, hint);

    Manifest m;
    m.command = "train " + model;
    m.config_hash = cfg.config_hash;
    m.seed = cfg.train.seed;
    for (int k : cfg.dataset.train_slices) {
        m.inputs.emplace_back(noisy_stack_name(k), file_fnv(artifact_path(cfg, noisy_stack_name(k))));
        m.inputs.emplace_back(gt_stack_name(k), file_fnv(artifact_path(cfg, gt_stack_name(k))));
    }
    for (int k : cfg.dataset.val_slices) {
        m.inputs.emplace_back(noisy_stack_name(k), file_fnv(artifact_path(cfg, noisy_stack_name(k))));
        m.inputs.emplace_back(gt_stack_name(k), file_fnv(artifact_path(cfg, gt_stack_name(k))));
    }

    if (model == "hsinet") {
        HsiNet net(cfg.make_hsinet(), model_seed(cfg, model));
        auto hist = train_hsinet(net, ts, cfg.train);
        save_model(cfg, m, model, net.arch_spec(), net.params(), hist);
    } else if (model == "videonet") {
        VideoNet net(cfg.make_videonet(), model_seed(cfg, model));
        auto hist = train_videonet(net, ts, cfg.train);
        save_model(cfg, m, model, net.arch_spec(), net.params(), hist);
    } else if (model == "combiner") {
        require_weights(cfg, "hsinet");
        require_weights(cfg, "videonet");
        HsiNet hsi(cfg.make_hsinet(), model_seed(cfg, "hsinet"));
        VideoNet video(cfg.make_videonet(), model_seed(cfg, "videonet"));
        load_weights(artifact_path(cfg, weights_name("hsinet")), hsi.arch_spec(), hsi.params());
        load_weights(artifact_path(cfg, weights_name("videonet")), video.arch_spec(), video.params());
        m.inputs.emplace_back(weights_name("hsinet"), file_fnv(artifact_path(cfg, weights_name("hsinet"))));
        m.inputs.emplace_back(weights_name("videonet"),
                              file_fnv(artifact_path(cfg, weights_name("videonet"))));
        Combiner comb(hsi.penultimate_channels(), video.penultimate_channels(), model_seed(cfg, model));
        comb.warm_start_from(hsi);
        auto hist = train_combiner(comb, hsi, video, ts, cfg.train);
        save_model(cfg, m, model, comb.arch_spec(), comb.params(), hist);
    } else {  // dncnn
        DnCnn net(cfg.make_dncnn(), model_seed(cfg, model));
        auto hist = train_dncnn(net, ts, cfg.train, cfg.train.dncnn_patch);
        save_model(cfg, m, model, net.arch_spec(), net.params(), hist);
    }
    m.write(artifact_path(cfg, "manifest_train_" + model + ".txt"));
}

NormalizedStack neural_denoise_stack(const NormalizedStack& noisy, HsiNet* hsi, VideoNet* video,
                                     Combiner* comb, const std::string& method, int threads) {
    NormalizedStack out = noisy;
    const int n_lines = noisy.n_rows * noisy.n_angles;
    const int k = hsi ? hsi->config().k_bands : 0;
    const int tidx = hsi ? window_target_index(k) : 0;

    if (method == "hsinet") {
        parallel_for(static_cast<std::size_t>(n_lines), threads, [&](std::size_t i) {
            const int row = static_cast<int>(i) / noisy.n_angles;
            const int angle = static_cast<int>(i) % noisy.n_angles;
            Tape t;
            Binder bi(t);
            bi.set_frozen(true);
            auto o = hsi->forward(t, bi, t.leaf(hsi_window(noisy, row, angle, k)), tidx);
            const Tensor& line = t.val(o.line);
            for (int w = 0; w < noisy.width; ++w)
                out.data[out.index(w, row, angle)] = line.v[static_cast<std::size_t>(w)];
        });
        return out;
    }

    // videonet and combined walk rows so each band image is built once
    for (int row = 0; row < noisy.n_rows; ++row) {
        std::vector<double> band = noisy.band_image(row);
        parallel_for(static_cast<std::size_t>(noisy.n_angles), threads, [&](std::size_t ai) {
            const int angle = static_cast<int>(ai);
            Tape t;
            Binder bi(t);
            bi.set_frozen(true);
            VideoSample vs = make_video_sample(band, noisy.width, noisy.n_angles, angle,
                                               video->config().patchcraft);
            auto vo = video->forward(t, bi, t.leaf(vs.input), t.leaf(vs.target), t.leaf(vs.angular));
            int line_node;
            if (method == "videonet") {
                line_node = vo.line;
            } else {  // combined
                auto ho = hsi->forward(t, bi, t.leaf(hsi_window(noisy, row, angle, k)), tidx);
                line_node = comb->forward(t, bi, ho.penultimate, vo.penultimate, t.leaf(vs.target));
            }
            const Tensor& line = t.val(line_node);
            for (int w = 0; w < noisy.width; ++w)
                out.data[out.index(w, row, angle)] = line.v[static_cast<std::size_t>(w)];
        });
    }
    return out;
}

NormalizedStack dncnn_denoise_stack(const NormalizedStack& noisy, DnCnn& net, int threads) {
    NormalizedStack out = noisy;
    parallel_for(static_cast<std::size_t>(noisy.n_rows), threads, [&](std::size_t ri) {
        const int row = static_cast<int>(ri);
        std::vector<double> band = noisy.band_image(row);
        Tensor img({1, noisy.n_angles, noisy.width}, band);
        Tape t;
        Binder bi(t);
        bi.set_frozen(true);
        int o = net.forward(t, bi, t.leaf(img));
        out.set_band_image(row, t.val(o).v);
    });
    return out;
}

void cmd_denoise(const PipelineConfig& cfg, const std::string& method_in) {
    std::string method = method_in.empty() ? cfg.denoise.method : method_in;
    static const std::set<std::string> kMethods{"nlm", "tv", "hsinet", "videonet", "combined", "dncnn"};
    if (!kMethods.count(method))
        throw ConfigError("unknown denoise method \"" + method + "\"");
    ensure_outdir(cfg);
    const char* hint = "run `simulate` first";

    // load whatever networks the method needs
    std::unique_ptr<HsiNet> hsi;
    std::unique_ptr<VideoNet> video;
    std::unique_ptr<Combiner> comb;
    std::unique_ptr<DnCnn> dncnn;
    Manifest m;
    m.command = "denoise " + method;
    m.config_hash = cfg.config_hash;
    m.seed = cfg.seed;
    auto need = [&](const std::string& model) {
        require_weights(cfg, model);
        std::string p = artifact_path(cfg, weights_name(model));
        m.inputs.emplace_back(weights_name(model), file_fnv(p));
        return p;
    };
    if (method == "hsinet" || method == "combined") {
        hsi = std::make_unique<HsiNet>(cfg.make_hsinet(), model_seed(cfg, "hsinet"));
        load_weights(need("hsinet"), hsi->arch_spec(), hsi->params());
    }
    if (method == "videonet" || method == "combined") {
        video = std::make_unique<VideoNet>(cfg.make_videonet(), model_seed(cfg, "videonet"));
        load_weights(need("videonet"), video->arch_spec(), video->params());
    }
    if (method == "combined") {
        comb = std::make_unique<Combiner>(hsi->penultimate_channels(), video->penultimate_channels(),
                                          model_seed(cfg, "combiner"));
        load_weights(need("combiner"), comb->arch_spec(), comb->params());
    }
    if (method == "dncnn") {
        dncnn = std::make_unique<DnCnn>(cfg.make_dncnn(), model_seed(cfg, "dncnn"));
        load_weights(need("dncnn"), dncnn->arch_spec(), dncnn->params());
    }

    for (int k : cfg.dataset.test_slices) {
        SinogramStack noisy = read_stack_checked(cfg, noisy_stack_name(k), hint);
        m.inputs.emplace_back(noisy_stack_name(k), file_fnv(artifact_path(cfg, noisy_stack_name(k))));
        NormalizedStack n = normalize_per_line(noisy);
        NormalizedStack den;
        if (method == "nlm")
            den = nlm_denoise_stack(n, cfg.denoise.nlm_patch_radius, cfg.denoise.nlm_search_radius,
                                    cfg.denoise.nlm_h, cfg.threads);
        else if (method == "tv")
            den = tv_denoise_stack(n, cfg.denoise.tv_lambda, cfg.denoise.tv_iters, cfg.threads);
        else if (method == "dncnn")
            den = dncnn_denoise_stack(n, *dncnn, cfg.threads);
        else
            den = neural_denoise_stack(n, hsi.get(), video.get(), comb.get(), method, cfg.threads);

        SinogramStack out = denormalize(den);
        out.row_e_min = noisy.row_e_min;
        out.row_e_max = noisy.row_e_max;
        out.row_e_mean = noisy.row_e_mean;
        out.seed = noisy.seed;
        std::string path = artifact_path(cfg, denoised_stack_name(method, k));
        write_stack(path, out);
        note_output(m, path);
        std::cout << "denoised slice " << k << " with " << method << " -> " << path << '\n';
    }
    m.write(artifact_path(cfg, "manifest_denoise_" + method + ".txt"));
}


// Windowed 16-bit preview next to the raw slice; full range of the image.
void export_slice_pgm(Manifest& m, const PipelineConfig& cfg, const std::string& slc_name,
                      const SliceImage& img) {
    auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
    double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) hi = lo + 1.0;
    std::string path = artifact_path(cfg, slc_name + ".pgm");
    write_pgm16(path, img.data, img.side, img.side, lo, hi);
    note_output(m, path);
}

void cmd_reconstruct(const PipelineConfig& cfg, int band_lo, int band_hi, const std::string& input) {
    ensure_outdir(cfg);
    std::string in_path = input.empty()
                              ? artifact_path(cfg, noisy_stack_name(cfg.dataset.test_slices.front()))
                              : input;
    if (!fs::exists(in_path)) throw DataError("missing input stack: " + in_path);
    SinogramStack stack = read_stack(in_path);
    if (band_hi < 0) band_hi = band_lo;
    if (band_lo < 0 || band_hi < band_lo || band_hi >= stack.n_rows)
        throw DataError("band range [" + std::to_string(band_lo) + ", " + std::to_string(band_hi) +
                        "] outside [0, " + std::to_string(stack.n_rows) + ")");

    Manifest m;
    m.command = "reconstruct";
    m.config_hash = cfg.config_hash;
    m.seed = cfg.seed;
    m.inputs.emplace_back(in_path, file_fnv(in_path));

    std::string stem = fs::path(in_path).stem().string();
    std::vector<double> angles = uniform_angles(stack.n_angles);
    for (int b = band_lo; b <= band_hi; ++b) {
        std::vector<double> sino = sinogram_from_stack(stack, b, true);
        SliceImage img = fbp(sino, stack.width, angles, cfg.dataset.pixel_pitch,
                             FilterWindow::ramlak, cfg.threads);
        img.band = b;
        std::string name = "recon_" + stem + "_band" + std::to_string(b) + ".slc";
        std::string path = artifact_path(cfg, name);
        write_slice(path, img);
        note_output(m, path);
        export_slice_pgm(m, cfg, name, img);
    }
    m.write(artifact_path(cfg, "manifest_reconstruct.txt"));
    std::cout << "reconstructed bands " << band_lo << ".." << band_hi << " of " << in_path << '\n';
}

void cmd_average_reference(const PipelineConfig& cfg, int n, int band_lo, int band_hi) {
    if (n < 1) throw ConfigError("average-reference: N must be >= 1");
    PipelineContext ctx = load_context(cfg);
    ensure_outdir(cfg);
    const int zk = cfg.dataset.test_slices.front();
    const int z = cfg.dataset.slices[static_cast<std::size_t>(zk)];
    if (band_hi < 0) band_hi = band_lo;
    if (band_lo < 0 || band_hi < band_lo || band_hi >= cfg.dataset.rows)
        throw DataError("band range [" + std::to_string(band_lo) + ", " + std::to_string(band_hi) +
                        "] outside [0, " + std::to_string(cfg.dataset.rows) + ")");

    std::vector<SinogramStack> noisy;
    noisy.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto pairs = simulate_slices(ctx, {z}, realization_seed(cfg, i));
        noisy.push_back(std::move(pairs.front().noisy));
    }
    std::vector<const SinogramStack*> ptrs;
    for (const auto& s : noisy) ptrs.push_back(&s);

    Manifest m;
    m.command = "average-reference " + std::to_string(n);
    m.config_hash = cfg.config_hash;
    m.seed = cfg.seed;
    m.inputs = ctx.input_hashes;

    // averaged projections as an f32 stack in DN domain
    SinogramStack avg;
    avg.width = noisy.front().width;
    avg.n_rows = noisy.front().n_rows;
    avg.n_angles = noisy.front().n_angles;
    avg.dtype = StackDType::f32;
    avg.flat_field = noisy.front().flat_field;
    avg.row_e_min = noisy.front().row_e_min;
    avg.row_e_max = noisy.front().row_e_max;
    avg.row_e_mean = noisy.front().row_e_mean;
    avg.preset = noisy.front().preset;
    avg.seed = cfg.seed;
    avg.allocate();
    for (std::size_t i = 0; i < avg.size(); ++i) {
        KahanSum ks;
        for (const auto& s : noisy) ks.add(static_cast<double>(s.u16[i]));
        avg.f32[i] = static_cast<float>(ks.value() / static_cast<double>(n));
    }
    std::string avg_path = artifact_path(cfg, "reference_avg" + std::to_string(n) + "_slice" +
                                                  std::to_string(zk) + ".stk");
    write_stack(avg_path, avg);
    note_output(m, avg_path);

    for (int b = band_lo; b <= band_hi; ++b) {
        SliceImage img =
            averaged_reference(ptrs, b, cfg.dataset.pixel_pitch, FilterWindow::ramlak, cfg.threads);
        std::string name = "reference_avg" + std::to_string(n) + "_band" + std::to_string(b) + ".slc";
        std::string path = artifact_path(cfg, name);
        write_slice(path, img);
        note_output(m, path);
        export_slice_pgm(m, cfg, name, img);
    }
    m.write(artifact_path(cfg, "manifest_average_reference.txt"));
    std::cout << "averaged " << n << " realizations of slice " << zk << ", bands " << band_lo << ".."
              << band_hi << '\n';
}

void cmd_evaluate(const PipelineConfig& cfg, const std::vector<std::string>& candidates) {
    if (candidates.empty()) throw ConfigError("evaluate: no candidates given");
    ensure_outdir(cfg);
    const char* hint = "run `simulate` first";

    Manifest m;
    m.command = "evaluate";
    m.config_hash = cfg.config_hash;
    m.seed = cfg.seed;

    for (int k : cfg.dataset.test_slices) {
        SinogramStack gt = read_stack_checked(cfg, gt_stack_name(k), hint);
        m.inputs.emplace_back(gt_stack_name(k), file_fnv(artifact_path(cfg, gt_stack_name(k))));
        NormalizedStack ref = normalize_per_line(gt);
        for (const std::string& cand : candidates) {
            std::string name;
            if (cand == "gt") name = gt_stack_name(k);
            else if (cand == "noisy") name = noisy_stack_name(k);
            else name = denoised_stack_name(cand, k);
            SinogramStack cs = read_stack_checked(cfg, name, "run `denoise` for this method first");
            m.inputs.emplace_back(name, file_fnv(artifact_path(cfg, name)));
            NormalizedStack cn = normalize_per_line(cs);
            MetricsReport rep = evaluate_method(ref, cn, cand, cfg.metrics.selection, cfg.metric_rows());
            std::string path =
                artifact_path(cfg, "report_" + cand + "_slice" + std::to_string(k) + ".csv");
            std::ofstream os(path, std::ios::binary);
            if (!os) throw DataError("cannot open for writing: " + path);
            os << rep.to_csv();
            os.close();
            note_output(m, path);
            std::cout << rep.to_table() << '\n';
        }
    }
    m.write(artifact_path(cfg, "manifest_evaluate.txt"));
}

}  // namespace msct
