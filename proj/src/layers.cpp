#include "msct/layers.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace msct {

void zero_grad(Param& p) {
    if (p.grad.numel() != p.value.numel()) p.grad = Tensor::zeros(p.value.shape);
    std::fill(p.grad.v.begin(), p.grad.v.end(), 0.0);
}

void he_init(Param& p, int fan_in, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (double& x : p.value.v) x = n(rng);
}

std::uint64_t layer_seed(std::uint64_t master, const std::string& name) {
    return hash_combine(master, fnv1a64(name));
}

int Binder::bind(Param& p) {
    auto it = aliases_.find(&p);
    if (it != aliases_.end()) return it->second;
    int id = tape_->leaf(p.value);
    if (!frozen_) bound_.emplace_back(&p, id);
    return id;
}

void Binder::harvest() {
    for (auto& [p, id] : bound_) {
        if (!tape_->has_grad(id)) continue;
        if (p->grad.numel() != p->value.numel()) p->grad = Tensor::zeros(p->value.shape);
        const Tensor& g = tape_->grad(id);
        for (std::size_t i = 0; i < g.v.size(); ++i) p->grad.v[i] += g.v[i];
    }
}

std::vector<Tensor> Binder::harvest(const std::vector<Param*>& order) const {
    std::unordered_map<Param*, std::size_t> slot;
    slot.reserve(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) slot[order[i]] = i;
    std::vector<Tensor> sink;
    sink.reserve(order.size());
    for (Param* p : order) sink.push_back(Tensor::zeros(p->value.shape));
    for (const auto& [p, id] : bound_) {
        auto it = slot.find(p);
        if (it == slot.end())
            throw DataError("harvest: bound param '" + p->name + "' missing from order list");
        if (!tape_->has_grad(id)) continue;
        const Tensor& g = const_cast<Tape*>(tape_)->grad(id);
        Tensor& dst = sink[it->second];
        for (std::size_t i = 0; i < g.v.size(); ++i) dst.v[i] += g.v[i];
    }
    return sink;
}

// ---- factories ----

namespace {

Param named(const std::string& name, std::vector<int> shape) {
    Param p;
    p.name = name;
    p.value = Tensor::zeros(std::move(shape));
    return p;
}

}  // namespace

Conv1d make_conv1d(const std::string& name, int cout, int cin, int k, std::uint64_t seed) {
    Conv1d l;
    l.w = named(name + "/w", {cout, cin, k});
    l.b = named(name + "/b", {cout});
    he_init(l.w, cin * k, layer_seed(seed, l.w.name));
    return l;
}

Conv1d make_conv1d_zero(const std::string& name, int cout, int cin, int k) {
    Conv1d l;
    l.w = named(name + "/w", {cout, cin, k});
    l.b = named(name + "/b", {cout});
    return l;
}

int conv1d_fwd(Tape& t, Binder& bi, Conv1d& l, int x, int axis, Pad pad) {
    return conv_axis(t, x, bi.bind(l.w), bi.bind(l.b), axis, pad);
}

Conv2dLayer make_conv2d(const std::string& name, int cout, int cin, int kh, int kw,
                        std::uint64_t seed) {
    Conv2dLayer l;
    l.w = named(name + "/w", {cout, cin, kh, kw});
    l.b = named(name + "/b", {cout});
    he_init(l.w, cin * kh * kw, layer_seed(seed, l.w.name));
    return l;
}

Conv2dLayer make_conv2d_zero(const std::string& name, int cout, int cin, int kh, int kw) {
    Conv2dLayer l;
    l.w = named(name + "/w", {cout, cin, kh, kw});
    l.b = named(name + "/b", {cout});
    return l;
}

int conv2d_fwd(Tape& t, Binder& bi, Conv2dLayer& l, int x) {
    return conv2d(t, x, bi.bind(l.w), bi.bind(l.b));
}

Dense make_dense(const std::string& name, int cout, int cin, std::uint64_t seed) {
    Dense l;
    l.w = named(name + "/w", {cout, cin});
    l.b = named(name + "/b", {cout});
    he_init(l.w, cin, layer_seed(seed, l.w.name));
    return l;
}

int dense_fwd(Tape& t, Binder& bi, Dense& l, int x) {
    return linear(t, x, bi.bind(l.w), bi.bind(l.b));
}

BatchNorm make_batchnorm(const std::string& name, int c) {
    BatchNorm l;
    l.gamma = named(name + "/gamma", {c});
    l.beta = named(name + "/beta", {c});
    std::fill(l.gamma.value.v.begin(), l.gamma.value.v.end(), 1.0);
    return l;
}

int batchnorm_fwd(Tape& t, Binder& bi, BatchNorm& l, int x) {
    return batchnorm(t, x, bi.bind(l.gamma), bi.bind(l.beta));
}

Cbam make_cbam(const std::string& name, int c, int reduction, std::uint64_t seed,
               int spatial_kernel) {
    if (c < 1) throw ConfigError("cbam: need at least one channel");
    int hidden = std::max(1, c / std::max(1, reduction));
    Cbam l;
    l.fc1 = make_dense(name + "/fc1", hidden, c, seed);
    l.fc2 = make_dense(name + "/fc2", c, hidden, seed);
    l.spatial = make_conv1d(name + "/spatial", 1, 2, spatial_kernel, seed);
    return l;
}

int cbam_fwd(Tape& t, Binder& bi, Cbam& l, int x) {
    const Tensor& tx = t.val(x);
    if (tx.rank() != 2)
        throw DataError("cbam: expected [C, L] input, got " + shape_str(tx.shape));
    int c = tx.dim(0);

    // channel attention
    int mx = dense_fwd(t, bi, l.fc2, relu(t, dense_fwd(t, bi, l.fc1, global_max(t, x))));
    int av = dense_fwd(t, bi, l.fc2, relu(t, dense_fwd(t, bi, l.fc1, global_avg(t, x))));
    int catt = reshape(t, sigmoid(t, add(t, mx, av)), {c, 1});
    int refined = mul(t, x, catt);

    // spatial attention on the refined features
    int maps = concat0(t, {channel_max(t, refined), channel_avg(t, refined)});
    int satt = sigmoid(t, conv1d_fwd(t, bi, l.spatial, maps));
    return mul(t, refined, satt);
}

std::pair<int, int> octave_channels(int c, double alpha) {
    if (c < 2) throw ConfigError("octave: need at least two channels to split");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("octave: alpha must be in (0, 1)");
    int low = static_cast<int>(std::lround(alpha * c));
    low = std::clamp(low, 1, c - 1);
    return {c - low, low};
}

OctaveSplit make_octave_split(const std::string& name, int cin, int ch_high, int ch_low, int k,
                              std::uint64_t seed) {
    OctaveSplit l;
    l.high = make_conv1d(name + "/high", ch_high, cin, k, seed);
    l.low = make_conv1d(name + "/low", ch_low, cin, k, seed);
    return l;
}

std::pair<int, int> octave_split_fwd(Tape& t, Binder& bi, OctaveSplit& l, int x) {
    int h = conv1d_fwd(t, bi, l.high, x);
    int lo = avgpool2_axis(t, conv1d_fwd(t, bi, l.low, x), 1);
    return {h, lo};
}

OctaveBlock make_octave_block(const std::string& name, int ch_high, int ch_low, int k,
                              int cbam_reduction, std::uint64_t seed) {
    OctaveBlock l;
    l.hh = make_conv1d(name + "/hh", ch_high, ch_high, k, seed);
    l.hl = make_conv1d(name + "/hl", ch_low, ch_high, k, seed);
    l.lh = make_conv1d(name + "/lh", ch_high, ch_low, k, seed);
    l.ll = make_conv1d(name + "/ll", ch_low, ch_low, k, seed);
    l.att_high = make_cbam(name + "/att_high", ch_high, cbam_reduction, seed);
    l.att_low = make_cbam(name + "/att_low", ch_low, cbam_reduction, seed);
    return l;
}

std::pair<int, int> octave_block_fwd(Tape& t, Binder& bi, OctaveBlock& l, int h, int lo) {
    int len_h = t.val(h).dim(1);
    int len_l = t.val(lo).dim(1);
    if (len_l != (len_h + 1) / 2)
        throw DataError("octave: low length " + std::to_string(len_l) + " does not match ceil(" +
                        std::to_string(len_h) + "/2)");
    int hh = conv1d_fwd(t, bi, l.hh, h);
    int lh = upsample2_axis(t, conv1d_fwd(t, bi, l.lh, lo), 1, len_h);
    int hl = avgpool2_axis(t, conv1d_fwd(t, bi, l.hl, h), 1);
    int ll = conv1d_fwd(t, bi, l.ll, lo);
    int yh = cbam_fwd(t, bi, l.att_high, relu(t, add(t, hh, lh)));
    int yl = cbam_fwd(t, bi, l.att_low, relu(t, add(t, ll, hl)));
    return {add(t, yh, h), add(t, yl, lo)};
}

OctaveMerge make_octave_merge(const std::string& name, int ch_high, int ch_low, int cout, int k,
                              std::uint64_t seed) {
    OctaveMerge l;
    l.high = make_conv1d(name + "/high", cout, ch_high, k, seed);
    l.low = make_conv1d(name + "/low", cout, ch_low, k, seed);
    return l;
}

int octave_merge_fwd(Tape& t, Binder& bi, OctaveMerge& l, int h, int lo) {
    int len_h = t.val(h).dim(1);
    int up = upsample2_axis(t, conv1d_fwd(t, bi, l.low, lo), 1, len_h);
    return add(t, conv1d_fwd(t, bi, l.high, h), up);
}

SepConv make_sepconv(const std::string& name, int cout, int cin, int k_spatial,
                     std::uint64_t seed) {
    SepConv l;
    l.spatial = make_conv1d(name + "/spatial", cout, cin, k_spatial, seed);
    l.group = make_conv1d(name + "/group", cout, cout, 3, seed);
    l.neighbor = make_conv1d(name + "/neighbor", cout, cout, 3, seed);
    return l;
}

int sepconv_fwd(Tape& t, Binder& bi, SepConv& l, int x) {
    if (t.val(x).rank() != 4)
        throw DataError("sepconv: expected [C, groups, neighbors, W], got " +
                        shape_str(t.val(x).shape));
    int y = conv1d_fwd(t, bi, l.spatial, x, 3);
    y = conv1d_fwd(t, bi, l.group, y, 1);
    return conv1d_fwd(t, bi, l.neighbor, y, 2);
}

// ---- param listings ----

void collect(std::vector<Param*>& out, Conv1d& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
}
void collect(std::vector<Param*>& out, Conv2dLayer& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
}
void collect(std::vector<Param*>& out, Dense& l) {
    out.push_back(&l.w);
    out.push_back(&l.b);
}
void collect(std::vector<Param*>& out, BatchNorm& l) {
    out.push_back(&l.gamma);
    out.push_back(&l.beta);
}
void collect(std::vector<Param*>& out, Cbam& l) {
    collect(out, l.fc1);
    collect(out, l.fc2);
    collect(out, l.spatial);
}
void collect(std::vector<Param*>& out, OctaveSplit& l) {
    collect(out, l.high);
    collect(out, l.low);
}
void collect(std::vector<Param*>& out, OctaveBlock& l) {
    collect(out, l.hh);
    collect(out, l.hl);
    collect(out, l.lh);
    collect(out, l.ll);
    collect(out, l.att_high);
    collect(out, l.att_low);
}
void collect(std::vector<Param*>& out, OctaveMerge& l) {
    collect(out, l.high);
    collect(out, l.low);
}
void collect(std::vector<Param*>& out, SepConv& l) {
    collect(out, l.spatial);
    collect(out, l.group);
    collect(out, l.neighbor);
}

}  // namespace msct
