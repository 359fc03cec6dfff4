#include "msct/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace msct {

void TrainConfig::validate() const {
    auto pos = [](double v, const char* what) {
        if (!(v > 0.0)) throw ConfigError(std::string("train config: ") + what + " must be positive");
    };
    pos(lr_videonet, "lr_videonet");
    pos(lr_hsinet, "lr_hsinet");
    pos(lr_combiner, "lr_combiner");
    pos(lr_dncnn, "lr_dncnn");
    pos(n_nearest_neighbors, "n_nearest_neighbors");
    pos(k_adjacent_bands, "k_adjacent_bands");
    pos(n_denoise_blocks, "n_denoise_blocks");
    pos(n_octave_blocks, "n_octave_blocks");
    pos(batch_size, "batch_size");
    pos(max_epochs, "max_epochs");
    if (!(alpha_octave > 0.0 && alpha_octave < 1.0))
        throw ConfigError("train config: alpha_octave must be in (0, 1)");
    if (patience < 1) throw ConfigError("train config: patience must be >= 1");
    if (n_octave_blocks != n_denoise_blocks)
        throw ConfigError("train config: n_octave_blocks must equal n_denoise_blocks (one octave "
                          "stage per denoise block)");
    if (threads < 0) throw ConfigError("train config: threads must be >= 0");
    if (steps_per_epoch < 0) throw ConfigError("train config: steps_per_epoch must be >= 0");
    if (val_stride < 1) throw ConfigError("train config: val_stride must be >= 1");
    if (dncnn_patch < 4) throw ConfigError("train config: dncnn_patch must be >= 4");
}

void Adam::step(const std::vector<Param*>& params) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (Param* p : params) {
        if (p->m.numel() != p->value.numel()) p->m = Tensor::zeros(p->value.shape);
        if (p->v.numel() != p->value.numel()) p->v = Tensor::zeros(p->value.shape);
        const bool has_grad = p->grad.numel() == p->value.numel();
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double g = has_grad ? p->grad.v[i] : 0.0;
            p->m.v[i] = beta1 * p->m.v[i] + (1.0 - beta1) * g;
            p->v.v[i] = beta2 * p->v.v[i] + (1.0 - beta2) * g * g;
            const double mhat = p->m.v[i] / c1;
            const double vhat = p->v.v[i] / c2;
            p->value.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

std::vector<LineRef> enumerate_lines(const std::vector<TrainPair>& slices, int stride) {
    if (stride < 1) throw ConfigError("enumerate_lines: stride must be >= 1");
    std::vector<LineRef> out;
    long long counter = 0;
    for (int s = 0; s < static_cast<int>(slices.size()); ++s) {
        const NormalizedStack& n = slices[static_cast<std::size_t>(s)].noisy;
        for (int r = 0; r < n.n_rows; ++r)
            for (int a = 0; a < n.n_angles; ++a, ++counter)
                if (counter % stride == 0) out.push_back({s, r, a});
    }
    return out;
}

namespace {

std::vector<Tensor> snapshot_values(const std::vector<Param*>& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const Param* p : params) out.push_back(p->value);
    return out;
}

void restore_values(const std::vector<Param*>& params, const std::vector<Tensor>& snap) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace

std::vector<LossRecord> run_training(std::vector<Param*> params, const std::vector<LineRef>& train_lines,
                                     const std::vector<LineRef>& val_lines, const TrainHooks& hooks,
                                     double lr, const TrainConfig& cfg, const std::string& tag) {
    cfg.validate();
    if (train_lines.empty()) throw ConfigError(tag + ": empty training set");
    if (val_lines.empty()) throw ConfigError(tag + ": empty validation set");
    const int threads = resolve_threads(cfg.threads);

    auto eval_val = [&]() {
        std::vector<double> losses(val_lines.size());
        parallel_for(val_lines.size(), threads,
                     [&](std::size_t i) { losses[i] = hooks.val_loss(val_lines[i]); });
        KahanSum ks;
        for (double l : losses) ks.add(l);
        return ks.value() / static_cast<double>(losses.size());
    };

    double best_val = eval_val();
    if (!std::isfinite(best_val)) throw NumericError(tag + ": non-finite validation loss before training");
    std::vector<Tensor> best = snapshot_values(params);

    Adam adam(lr);
    std::vector<LossRecord> history;
    int bad = 0;

    std::vector<std::size_t> order(train_lines.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::mt19937_64 rng(hash_combine(cfg.seed, static_cast<std::uint64_t>(epoch) + 0x9e37u));
        std::shuffle(order.begin(), order.end(), rng);
        std::size_t n_use = order.size();
        if (cfg.steps_per_epoch > 0)
            n_use = std::min(n_use, static_cast<std::size_t>(cfg.steps_per_epoch) *
                                        static_cast<std::size_t>(cfg.batch_size));

        KahanSum train_sum;
        std::size_t n_seen = 0;
        for (std::size_t start = 0; start < n_use; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t bsize =
                std::min(static_cast<std::size_t>(cfg.batch_size), n_use - start);
            std::vector<std::vector<Tensor>> sinks(bsize);
            std::vector<double> losses(bsize);
            parallel_for(bsize, threads, [&](std::size_t j) {
                Tape t;
                Binder bi(t);
                int loss = hooks.train_loss(train_lines[order[start + j]], t, bi);
                t.backward(loss);
                losses[j] = t.val(loss).v[0];
                sinks[j] = bi.harvest(params);
            });

            const std::size_t batch_index = start / static_cast<std::size_t>(cfg.batch_size);
            for (std::size_t j = 0; j < bsize; ++j) {
                if (!std::isfinite(losses[j]))
                    throw NumericError(tag + ": non-finite loss in batch " +
                                       std::to_string(batch_index) + " of epoch " +
                                       std::to_string(epoch));
                train_sum.add(losses[j]);
            }
            n_seen += bsize;

            // merge per-line gradients in line order: mean over the batch
            const double inv = 1.0 / static_cast<double>(bsize);
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                Param* p = params[pi];
                if (p->grad.numel() != p->value.numel()) p->grad = Tensor::zeros(p->value.shape);
                else std::fill(p->grad.v.begin(), p->grad.v.end(), 0.0);
                for (std::size_t j = 0; j < bsize; ++j) {
                    const Tensor& g = sinks[j][pi];
                    for (std::size_t k = 0; k < g.numel(); ++k) p->grad.v[k] += inv * g.v[k];
                }
            }
            adam.step(params);
        }

        const double train_mse = train_sum.value() / static_cast<double>(n_seen);
        const double val_mse = eval_val();
        if (!std::isfinite(val_mse))
            throw NumericError(tag + ": non-finite validation loss after epoch " + std::to_string(epoch));
        history.push_back({epoch, train_mse, val_mse});

        if (val_mse < best_val) {
            best_val = val_mse;
            best = snapshot_values(params);
            bad = 0;
        } else if (++bad >= cfg.patience) {
            break;
        }
    }

    restore_values(params, best);
    return history;
}

namespace {

Tensor clean_line(const NormalizedStack& s, const LineRef& l, const std::vector<int>& shape) {
    Tensor gt(shape);
    for (int w = 0; w < s.width; ++w)
        gt.v[static_cast<std::size_t>(w)] = s.data[s.index(w, l.row, l.angle)];
    return gt;
}

void check_dataset(const TrainSet& data, const std::string& tag) {
    auto check = [&](const std::vector<TrainPair>& v, const char* part) {
        for (const TrainPair& sp : v) {
            if (sp.noisy.width != sp.clean.width || sp.noisy.n_rows != sp.clean.n_rows ||
                sp.noisy.n_angles != sp.clean.n_angles)
                throw DataError(tag + ": noisy/clean shape mismatch in " + part + " slice");
        }
    };
    check(data.train, "train");
    check(data.val, "val");
}

}  // namespace

std::vector<LossRecord> train_hsinet(HsiNet& net, const TrainSet& data, const TrainConfig& cfg) {
    cfg.validate();
    check_dataset(data, "hsinet");
    if (net.config().k_bands != cfg.k_adjacent_bands)
        throw ConfigError("hsinet: network k_bands " + std::to_string(net.config().k_bands) +
                          " != config k_adjacent_bands " + std::to_string(cfg.k_adjacent_bands));
    const int k = net.config().k_bands;
    const int tidx = window_target_index(k);

    TrainHooks hooks;
    hooks.train_loss = [&, k, tidx](const LineRef& l, Tape& t, Binder& bi) {
        const TrainPair& sp = data.train[static_cast<std::size_t>(l.slice)];
        int win = t.leaf(hsi_window(sp.noisy, l.row, l.angle, k));
        int gt = t.leaf(clean_line(sp.clean, l, {sp.clean.width}));
        auto out = net.forward(t, bi, win, tidx);
        return mse(t, out.line, gt);
    };
    hooks.val_loss = [&, k, tidx](const LineRef& l) {
        const TrainPair& sp = data.val[static_cast<std::size_t>(l.slice)];
        Tape t;
        Binder bi(t);
        bi.set_frozen(true);
        int win = t.leaf(hsi_window(sp.noisy, l.row, l.angle, k));
        int gt = t.leaf(clean_line(sp.clean, l, {sp.clean.width}));
        auto out = net.forward(t, bi, win, tidx);
        return t.val(mse(t, out.line, gt)).v[0];
    };

    return run_training(net.params(), enumerate_lines(data.train),
                        enumerate_lines(data.val, cfg.val_stride), hooks, cfg.lr_hsinet, cfg,
                        "hsinet");
}

std::vector<LossRecord> train_videonet(VideoNet& net, const TrainSet& data, const TrainConfig& cfg) {
    cfg.validate();
    check_dataset(data, "videonet");
    if (net.config().patchcraft.n_neighbors != cfg.n_nearest_neighbors)
        throw ConfigError("videonet: network n_neighbors " +
                          std::to_string(net.config().patchcraft.n_neighbors) +
                          " != config n_nearest_neighbors " +
                          std::to_string(cfg.n_nearest_neighbors));
    const PatchCraftConfig& pc = net.config().patchcraft;

    auto build = [&](const TrainPair& sp, const LineRef& l, Tape& t, Binder& bi) {
        VideoSample vs =
            make_video_sample(sp.noisy.band_image(l.row), sp.noisy.width, sp.noisy.n_angles, l.angle, pc);
        int in = t.leaf(vs.input);
        int target = t.leaf(vs.target);
        int ang = t.leaf(vs.angular);
        int gt = t.leaf(clean_line(sp.clean, l, {sp.clean.width}));
        auto out = net.forward(t, bi, in, target, ang);
        return mse(t, out.line, gt);
    };

    TrainHooks hooks;
    hooks.train_loss = [&](const LineRef& l, Tape& t, Binder& bi) {
        return build(data.train[static_cast<std::size_t>(l.slice)], l, t, bi);
    };
    hooks.val_loss = [&](const LineRef& l) {
        Tape t;
        Binder bi(t);
        bi.set_frozen(true);
        int loss = build(data.val[static_cast<std::size_t>(l.slice)], l, t, bi);
        return t.val(loss).v[0];
    };

    return run_training(net.params(), enumerate_lines(data.train),
                        enumerate_lines(data.val, cfg.val_stride), hooks, cfg.lr_videonet, cfg,
                        "videonet");
}

std::vector<LossRecord> train_combiner(Combiner& comb, HsiNet& hsi, VideoNet& video,
                                       const TrainSet& data, const TrainConfig& cfg) {
    cfg.validate();
    check_dataset(data, "combiner");
    const int k = hsi.config().k_bands;
    const int tidx = window_target_index(k);
    const PatchCraftConfig& pc = video.config().patchcraft;

    // Upstreams run frozen on a scratch tape; only their penultimate values
    // cross over, as constant leaves, so the combiner tape stays tiny and the
    // upstream weights can never move.
    auto features = [&](const TrainPair& sp, const LineRef& l, Tensor& hsi_pen, Tensor& video_pen) {
        Tape t;
        Binder bi(t);
        bi.set_frozen(true);
        int win = t.leaf(hsi_window(sp.noisy, l.row, l.angle, k));
        auto ho = hsi.forward(t, bi, win, tidx);
        VideoSample vs =
            make_video_sample(sp.noisy.band_image(l.row), sp.noisy.width, sp.noisy.n_angles, l.angle, pc);
        auto vo = video.forward(t, bi, t.leaf(vs.input), t.leaf(vs.target), t.leaf(vs.angular));
        hsi_pen = t.val(ho.penultimate);
        video_pen = t.val(vo.penultimate);
    };

    auto build = [&](const TrainPair& sp, const LineRef& l, Tape& t, Binder& bi) {
        Tensor hp, vp;
        features(sp, l, hp, vp);
        Tensor target({1, sp.noisy.width});
        for (int w = 0; w < sp.noisy.width; ++w)
            target.v[static_cast<std::size_t>(w)] = sp.noisy.data[sp.noisy.index(w, l.row, l.angle)];
        int line = comb.forward(t, bi, t.leaf(hp), t.leaf(vp), t.leaf(target));
        int gt = t.leaf(clean_line(sp.clean, l, {sp.clean.width}));
        return mse(t, line, gt);
    };

    TrainHooks hooks;
    hooks.train_loss = [&](const LineRef& l, Tape& t, Binder& bi) {
        return build(data.train[static_cast<std::size_t>(l.slice)], l, t, bi);
    };
    hooks.val_loss = [&](const LineRef& l) {
        Tape t;
        Binder bi(t);
        bi.set_frozen(true);
        int loss = build(data.val[static_cast<std::size_t>(l.slice)], l, t, bi);
        return t.val(loss).v[0];
    };

    return run_training(comb.params(), enumerate_lines(data.train),
                        enumerate_lines(data.val, cfg.val_stride), hooks, cfg.lr_combiner, cfg,
                        "combiner");
}

std::vector<LossRecord> train_dncnn(DnCnn& net, const TrainSet& data, const TrainConfig& cfg, int patch) {
    cfg.validate();
    check_dataset(data, "dncnn");
    if (patch < 3) throw ConfigError("dncnn: patch must be >= 3");
    for (const TrainPair& sp : data.train)
        if (sp.noisy.width < patch || sp.noisy.n_angles < patch)
            throw ConfigError("dncnn: band images smaller than the training patch");

    // One sample per (slice, row, angle): the angle seeds a deterministic
    // crop origin inside the row's band image.
    auto crop = [&](const NormalizedStack& s, const LineRef& l, int x0, int y0) {
        Tensor t({1, patch, patch});
        std::vector<double> img = s.band_image(l.row);
        for (int y = 0; y < patch; ++y)
            for (int x = 0; x < patch; ++x)
                t.v[static_cast<std::size_t>(y) * patch + x] =
                    img[static_cast<std::size_t>(y0 + y) * s.width + (x0 + x)];
        return t;
    };
    auto origin = [&](const TrainPair& sp, const LineRef& l, int& x0, int& y0) {
        std::uint64_t h = hash_combine(cfg.seed, static_cast<std::uint64_t>(l.slice) ^
                                                     (static_cast<std::uint64_t>(l.row) << 20) ^
                                                     (static_cast<std::uint64_t>(l.angle) << 40));
        x0 = static_cast<int>(h % static_cast<std::uint64_t>(sp.noisy.width - patch + 1));
        y0 = static_cast<int>((h >> 32) % static_cast<std::uint64_t>(sp.noisy.n_angles - patch + 1));
    };

    auto build = [&](const TrainPair& sp, const LineRef& l, Tape& t, Binder& bi) {
        int x0 = 0, y0 = 0;
        origin(sp, l, x0, y0);
        int in = t.leaf(crop(sp.noisy, l, x0, y0));
        int gt = t.leaf(crop(sp.clean, l, x0, y0));
        int out = net.forward(t, bi, in);
        return mse(t, out, gt);
    };

    TrainHooks hooks;
    hooks.train_loss = [&](const LineRef& l, Tape& t, Binder& bi) {
        return build(data.train[static_cast<std::size_t>(l.slice)], l, t, bi);
    };
    hooks.val_loss = [&](const LineRef& l) {
        Tape t;
        Binder bi(t);
        bi.set_frozen(true);
        int loss = build(data.val[static_cast<std::size_t>(l.slice)], l, t, bi);
        return t.val(loss).v[0];
    };

    return run_training(net.params(), enumerate_lines(data.train),
                        enumerate_lines(data.val, cfg.val_stride), hooks, cfg.lr_dncnn, cfg,
                        "dncnn");
}

}  // namespace msct
