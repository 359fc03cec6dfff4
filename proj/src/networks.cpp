#include "msct/networks.hpp"

#include <algorithm>
#include <sstream>

namespace msct {

std::vector<int> window_rows(int n_rows, int target, int k) {
    if (n_rows < 1) throw ConfigError("window_rows: empty stack");
    if (target < 0 || target >= n_rows)
        throw ConfigError("window_rows: target band " + std::to_string(target) + " outside [0, " +
                          std::to_string(n_rows) + ")");
    if (k < 1) throw ConfigError("window_rows: k must be >= 1");
    std::vector<int> rows(static_cast<std::size_t>(k));
    int start = target - (k - 1) / 2;
    for (int j = 0; j < k; ++j)
        rows[static_cast<std::size_t>(j)] = std::clamp(start + j, 0, n_rows - 1);
    return rows;
}

int window_target_index(int k) { return (k - 1) / 2; }

Tensor hsi_window(const NormalizedStack& s, int row, int angle, int k) {
    if (angle < 0 || angle >= s.n_angles) throw ConfigError("hsi_window: angle outside stack");
    std::vector<int> rows = window_rows(s.n_rows, row, k);
    Tensor w({k, s.width});
    for (int j = 0; j < k; ++j)
        for (int x = 0; x < s.width; ++x)
            w.v[static_cast<std::size_t>(j) * s.width + x] =
                s.data[s.index(x, rows[static_cast<std::size_t>(j)], angle)];
    return w;
}

// ---- HsiNet ----

void HsiNetConfig::validate() const {
    if (k_bands < 1) throw ConfigError("hsinet: k_bands must be >= 1");
    if (spatial_channels < 1 || spectral_channels < 1)
        throw ConfigError("hsinet: extractor channels must be >= 1");
    if (trunk_channels < 2) throw ConfigError("hsinet: trunk needs >= 2 channels for the octave split");
    if (n_blocks < 1) throw ConfigError("hsinet: n_blocks must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("hsinet: alpha must be in (0, 1)");
    if (cbam_reduction < 1) throw ConfigError("hsinet: cbam_reduction must be >= 1");
}

HsiNet::HsiNet(HsiNetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    auto [hi, lo] = octave_channels(cfg_.trunk_channels, cfg_.alpha);
    ch_high_ = hi;
    ch_low_ = lo;
    const int cs = cfg_.spatial_channels;
    const int cp = cfg_.spectral_channels;
    spat3_ = make_conv1d("hsi/spat3", cs, 1, 3, seed);
    spat5_ = make_conv1d("hsi/spat5", cs, 1, 5, seed);
    spat7_ = make_conv1d("hsi/spat7", cs, 1, 7, seed);
    spec_band3_ = make_conv1d("hsi/spec3/band", cp, 1, cfg_.k_bands, seed);
    spec_band5_ = make_conv1d("hsi/spec5/band", cp, 1, cfg_.k_bands, seed);
    spec_band7_ = make_conv1d("hsi/spec7/band", cp, 1, cfg_.k_bands, seed);
    spec_w3_ = make_conv1d("hsi/spec3/w", cp, cp, 3, seed);
    spec_w5_ = make_conv1d("hsi/spec5/w", cp, cp, 5, seed);
    spec_w7_ = make_conv1d("hsi/spec7/w", cp, cp, 7, seed);
    const int mixed = 3 * cs + 3 * cp;
    cbam_in_ = make_cbam("hsi/cbam_in", mixed, cfg_.cbam_reduction, seed);
    trunk_ = make_conv1d("hsi/trunk", cfg_.trunk_channels, mixed, 3, seed);
    split_ = make_octave_split("hsi/split", cfg_.trunk_channels, ch_high_, ch_low_, 3, seed);
    blocks_.reserve(static_cast<std::size_t>(cfg_.n_blocks));
    for (int i = 0; i < cfg_.n_blocks; ++i)
        blocks_.push_back(make_octave_block("hsi/block" + std::to_string(i), ch_high_, ch_low_, 3,
                                            cfg_.cbam_reduction, seed));
    merge_ = make_octave_merge("hsi/merge", ch_high_, ch_low_, cfg_.trunk_channels, 3, seed);
    cbam_out_ = make_cbam("hsi/cbam_out", cfg_.trunk_channels, cfg_.cbam_reduction, seed);
    final_ = make_conv1d_zero("hsi/final", 1, cfg_.trunk_channels, 3);
}

HsiNet::Out HsiNet::forward(Tape& t, Binder& bi, int window, int target_idx) {
    const Tensor& win = t.val(window);
    if (win.rank() != 2 || win.dim(0) != cfg_.k_bands)
        throw DataError("hsinet: window must be [" + std::to_string(cfg_.k_bands) +
                        ", width], got " + shape_str(win.shape));
    if (target_idx < 0 || target_idx >= cfg_.k_bands)
        throw DataError("hsinet: target index outside window");
    const int width = win.dim(1);

    int target = slice0(t, window, target_idx, target_idx + 1);  // [1, W]

    int sp = concat0(t, {relu(t, conv1d_fwd(t, bi, spat3_, target)),
                         relu(t, conv1d_fwd(t, bi, spat5_, target)),
                         relu(t, conv1d_fwd(t, bi, spat7_, target))});

    int cube = reshape(t, window, {1, cfg_.k_bands, width});
    auto spectral = [&](Conv1d& band, Conv1d& along) {
        int y = conv1d_fwd(t, bi, band, cube, 1, Pad::valid);  // [c, 1, W]
        y = relu(t, conv1d_fwd(t, bi, along, y, 2, Pad::same));
        return reshape(t, y, {cfg_.spectral_channels, width});
    };
    int sc = concat0(t, {spectral(spec_band3_, spec_w3_), spectral(spec_band5_, spec_w5_),
                         spectral(spec_band7_, spec_w7_)});

    int mixed = cbam_fwd(t, bi, cbam_in_, concat0(t, {sp, sc}));
    int feat = relu(t, conv1d_fwd(t, bi, trunk_, mixed));

    auto [h, lo] = octave_split_fwd(t, bi, split_, feat);
    for (OctaveBlock& blk : blocks_) {
        auto [h2, lo2] = octave_block_fwd(t, bi, blk, h, lo);
        h = h2;
        lo = lo2;
    }
    int merged = relu(t, octave_merge_fwd(t, bi, merge_, h, lo));
    int pen = cbam_fwd(t, bi, cbam_out_, merged);

    int noise = conv1d_fwd(t, bi, final_, pen);  // [1, W]
    int line = reshape(t, sub(t, target, noise), {width});
    return {line, pen};
}

std::vector<Param*> HsiNet::params() {
    std::vector<Param*> ps;
    collect(ps, spat3_);
    collect(ps, spat5_);
    collect(ps, spat7_);
    collect(ps, spec_band3_);
    collect(ps, spec_w3_);
    collect(ps, spec_band5_);
    collect(ps, spec_w5_);
    collect(ps, spec_band7_);
    collect(ps, spec_w7_);
    collect(ps, cbam_in_);
    collect(ps, trunk_);
    collect(ps, split_);
    for (OctaveBlock& b : blocks_) collect(ps, b);
    collect(ps, merge_);
    collect(ps, cbam_out_);
    collect(ps, final_);
    return ps;
}

std::string HsiNet::arch_spec() const {
    std::ostringstream os;
    os << "hsinet k=" << cfg_.k_bands << " spatial=" << cfg_.spatial_channels
       << " spectral=" << cfg_.spectral_channels << " trunk=" << cfg_.trunk_channels
       << " blocks=" << cfg_.n_blocks << " high/low=" << ch_high_ << "/" << ch_low_
       << " cbam_r=" << cfg_.cbam_reduction << " final_k=3";
    return os.str();
}

// ---- VideoNet ----

void VideoNetConfig::validate() const {
    if (sep_channels < 1) throw ConfigError("videonet: sep_channels must be >= 1");
    if (n_sepconv < 1) throw ConfigError("videonet: n_sepconv must be >= 1");
    if (conv2d_channels < 1 || conv1d_channels < 1)
        throw ConfigError("videonet: angular channels must be >= 1");
    if (n_conv1d < 2) throw ConfigError("videonet: n_conv1d must be >= 2");
    if (patchcraft.n_neighbors < 1 || patchcraft.offsets.empty())
        throw ConfigError("videonet: patchcraft config incomplete");
}

VideoSample make_video_sample(const std::vector<double>& band, int width, int n_angles,
                              int target_angle, const PatchCraftConfig& cfg) {
    PatchFrames pf = patch_craft_frames(band, width, n_angles, target_angle, cfg);
    const int O = pf.n_offsets, N = pf.n_neighbors, W = pf.width;
    VideoSample s;
    s.input = Tensor({3, O, N, W});
    const std::size_t plane = static_cast<std::size_t>(O) * N * W;
    std::copy(pf.frames.begin(), pf.frames.end(), s.input.v.begin());
    const double* tgt = band.data() + static_cast<std::size_t>(target_angle) * width;
    for (int o = 0; o < O; ++o)
        for (int n = 0; n < N; ++n)
            for (int w = 0; w < W; ++w) {
                std::size_t i = (static_cast<std::size_t>(o) * N + n) * W + w;
                s.input.v[plane + i] = tgt[w];
                s.input.v[2 * plane + i] = pf.distance[static_cast<std::size_t>(w)];
            }
    s.target = Tensor({1, W});
    std::copy(tgt, tgt + W, s.target.v.begin());
    const int A = 2 * cfg.angle_window + 1;
    s.angular = Tensor({A, W});
    for (int j = 0; j < A; ++j) {
        int a = std::clamp(target_angle - cfg.angle_window + j, 0, n_angles - 1);
        const double* row = band.data() + static_cast<std::size_t>(a) * width;
        std::copy(row, row + W, s.angular.v.begin() + static_cast<std::ptrdiff_t>(j) * W);
    }
    return s;
}

VideoNet::VideoNet(VideoNetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    const int cs = cfg_.sep_channels;
    for (int i = 0; i < cfg_.n_sepconv; ++i) {
        sep_.push_back(make_sepconv("video/sep" + std::to_string(i), cs, i == 0 ? 3 : cs, 3, seed));
        sep_bn_.push_back(make_batchnorm("video/sep_bn" + std::to_string(i), cs));
    }
    sep_final_.spatial = make_conv1d_zero("video/sep_final/spatial", 1, cs, 3);
    sep_final_.group = make_conv1d_zero("video/sep_final/group", 1, 1, 3);
    sep_final_.neighbor = make_conv1d_zero("video/sep_final/neighbor", 1, 1, 3);

    const int c2 = cfg_.conv2d_channels;
    ang2d_.push_back(make_conv2d("video/ang2d0", c2, 1, 3, 3, seed));
    ang2d_.push_back(make_conv2d("video/ang2d1", c2, c2, 3, 3, seed));
    ang2d_.push_back(make_conv2d("video/ang2d2", c2, c2, 3, 3, seed));

    const int H = cfg_.n_offsets() * cfg_.patchcraft.n_neighbors + cfg_.angular_rows();
    const int ca = cfg_.conv1d_channels;
    ang1d_.push_back(make_conv1d("video/ang1d0", ca, c2 * H, 3, seed));
    for (int i = 1; i < cfg_.n_conv1d - 1; ++i)
        ang1d_.push_back(make_conv1d("video/ang1d" + std::to_string(i), ca, ca, 3, seed));
    ang1d_.push_back(make_conv1d_zero("video/ang1d" + std::to_string(cfg_.n_conv1d - 1), 1, ca, 3));
}

VideoNet::Out VideoNet::forward(Tape& t, Binder& bi, int input, int target, int angular) {
    const Tensor& in = t.val(input);
    const int O = cfg_.n_offsets();
    const int N = cfg_.patchcraft.n_neighbors;
    const int A = cfg_.angular_rows();
    if (in.rank() != 4 || in.dim(0) != 3 || in.dim(1) != O || in.dim(2) != N)
        throw DataError("videonet: input must be [3, " + std::to_string(O) + ", " +
                        std::to_string(N) + ", width], got " + shape_str(in.shape));
    const int width = in.dim(3);
    if (t.val(angular).shape != std::vector<int>{A, width})
        throw DataError("videonet: angular window must be [" + std::to_string(A) + ", " +
                        std::to_string(width) + "], got " + shape_str(t.val(angular).shape));

    int y = input;
    for (std::size_t i = 0; i < sep_.size(); ++i)
        y = relu(t, batchnorm_fwd(t, bi, sep_bn_[i], sepconv_fwd(t, bi, sep_[i], y)));
    int noise4 = sepconv_fwd(t, bi, sep_final_, y);  // [1, O, N, W]

    int frames = reshape(t, slice0(t, input, 0, 1), {O, N, width});
    int den = sub(t, frames, reshape(t, noise4, {O, N, width}));

    int stackn = concat0(t, {reshape(t, den, {O * N, width}), angular});  // [H, W]
    const int H = O * N + A;
    int img = reshape(t, stackn, {1, H, width});
    for (Conv2dLayer& c : ang2d_) img = relu(t, conv2d_fwd(t, bi, c, img));
    int feat = reshape(t, img, {cfg_.conv2d_channels * H, width});

    for (std::size_t i = 0; i + 1 < ang1d_.size(); ++i)
        feat = relu(t, conv1d_fwd(t, bi, ang1d_[i], feat));
    int pen = feat;  // [conv1d_channels, W]
    int noise = conv1d_fwd(t, bi, ang1d_.back(), pen);
    int line = reshape(t, sub(t, target, noise), {width});
    return {line, pen};
}

std::vector<Param*> VideoNet::params() {
    std::vector<Param*> ps;
    for (std::size_t i = 0; i < sep_.size(); ++i) {
        collect(ps, sep_[i]);
        collect(ps, sep_bn_[i]);
    }
    collect(ps, sep_final_);
    for (Conv2dLayer& c : ang2d_) collect(ps, c);
    for (Conv1d& c : ang1d_) collect(ps, c);
    return ps;
}

std::string VideoNet::arch_spec() const {
    std::ostringstream os;
    os << "videonet sep=" << cfg_.n_sepconv << "x" << cfg_.sep_channels
       << " offsets=" << cfg_.n_offsets() << " neighbors=" << cfg_.patchcraft.n_neighbors
       << " patch=" << cfg_.patchcraft.patch_len << " window=" << cfg_.patchcraft.angle_window
       << " conv2d=3x" << cfg_.conv2d_channels << " conv1d=" << cfg_.n_conv1d << "x"
       << cfg_.conv1d_channels;
    return os.str();
}

// ---- Combiner ----

Combiner::Combiner(int hsi_channels, int video_channels, std::uint64_t seed, int kernel)
    : hsi_ch_(hsi_channels), video_ch_(video_channels) {
    if (hsi_channels < 1 || video_channels < 1)
        throw ConfigError("combiner: both feature inputs need >= 1 channel");
    conv_ = make_conv1d("comb/conv", 1, hsi_channels + video_channels, kernel, seed);
}

int Combiner::forward(Tape& t, Binder& bi, int hsi_pen, int video_pen, int target) {
    if (t.val(hsi_pen).dim(0) != hsi_ch_ || t.val(video_pen).dim(0) != video_ch_)
        throw DataError("combiner: feature channel mismatch, got " +
                        shape_str(t.val(hsi_pen).shape) + " and " +
                        shape_str(t.val(video_pen).shape));
    if (t.val(hsi_pen).dim(1) != t.val(video_pen).dim(1))
        throw DataError("combiner: feature width mismatch, " + shape_str(t.val(hsi_pen).shape) +
                        " vs " + shape_str(t.val(video_pen).shape));
    const int width = t.val(hsi_pen).dim(1);
    int cat = concat0(t, {hsi_pen, video_pen});
    int noise = conv1d_fwd(t, bi, conv_, cat);
    return reshape(t, sub(t, target, noise), {width});
}

void Combiner::warm_start_from(const HsiNet& h) {
    const Conv1d& f = h.final_conv();
    const int k = conv_.w.value.dim(2);
    if (f.w.value.dim(1) != hsi_ch_ || f.w.value.dim(2) != k)
        throw ConfigError("combiner: warm start shape mismatch against " +
                          shape_str(f.w.value.shape));
    std::fill(conv_.w.value.v.begin(), conv_.w.value.v.end(), 0.0);
    for (int c = 0; c < hsi_ch_; ++c)
        for (int j = 0; j < k; ++j)
            conv_.w.value.v[static_cast<std::size_t>(c) * k + j] =
                f.w.value.v[static_cast<std::size_t>(c) * k + j];
    conv_.b.value.v = f.b.value.v;
}

std::vector<Param*> Combiner::params() {
    std::vector<Param*> ps;
    collect(ps, conv_);
    return ps;
}

std::string Combiner::arch_spec() const {
    std::ostringstream os;
    os << "combiner hsi=" << hsi_ch_ << " video=" << video_ch_ << " k=" << conv_.w.value.dim(2);
    return os.str();
}

// ---- DnCnn ----

void DnCnnConfig::validate() const {
    if (channels < 1) throw ConfigError("dncnn: channels must be >= 1");
    if (n_hidden < 1) throw ConfigError("dncnn: n_hidden must be >= 1");
}

DnCnn::DnCnn(DnCnnConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    first_ = make_conv2d("dncnn/first", cfg_.channels, 1, 3, 3, seed);
    for (int i = 0; i < cfg_.n_hidden; ++i) {
        hidden_.push_back(make_conv2d("dncnn/hidden" + std::to_string(i), cfg_.channels,
                                      cfg_.channels, 3, 3, seed));
        bn_.push_back(make_batchnorm("dncnn/bn" + std::to_string(i), cfg_.channels));
    }
    final_ = make_conv2d_zero("dncnn/final", 1, cfg_.channels, 3, 3);
}

int DnCnn::forward(Tape& t, Binder& bi, int patch) {
    if (t.val(patch).rank() != 3 || t.val(patch).dim(0) != 1)
        throw DataError("dncnn: input must be [1, H, W], got " + shape_str(t.val(patch).shape));
    int y = relu(t, conv2d_fwd(t, bi, first_, patch));
    for (std::size_t i = 0; i < hidden_.size(); ++i)
        y = relu(t, batchnorm_fwd(t, bi, bn_[i], conv2d_fwd(t, bi, hidden_[i], y)));
    int noise = conv2d_fwd(t, bi, final_, y);
    return sub(t, patch, noise);
}

std::vector<Param*> DnCnn::params() {
    std::vector<Param*> ps;
    collect(ps, first_);
    for (std::size_t i = 0; i < hidden_.size(); ++i) {
        collect(ps, hidden_[i]);
        collect(ps, bn_[i]);
    }
    collect(ps, final_);
    return ps;
}

std::string DnCnn::arch_spec() const {
    std::ostringstream os;
    os << "dncnn channels=" << cfg_.channels << " hidden=" << cfg_.n_hidden << " k=3";
    return os.str();
}

}  // namespace msct
