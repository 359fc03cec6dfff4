#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <bit>
#include <cmath>
#include <random>

#include "doctest.h"
#include "msct/train.hpp"

using namespace msct;

namespace {

NormalizedStack make_stack(int width, int n_rows, int n_angles, std::uint64_t seed, double noise_sigma) {
    NormalizedStack s;
    s.width = width;
    s.n_rows = n_rows;
    s.n_angles = n_angles;
    s.flat_field.assign(static_cast<std::size_t>(n_rows), 1000.0);
    s.data.resize(s.size());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (int a = 0; a < n_angles; ++a)
        for (int r = 0; r < n_rows; ++r)
            for (int w = 0; w < width; ++w) {
                // smooth separable profile in [0.2, 0.8]
                double base = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * w / width) *
                                        std::cos(2.0 * std::numbers::pi * a / n_angles + 0.3 * r);
                s.data[s.index(w, r, a)] = base + (noise_sigma > 0 ? noise(rng) : 0.0);
            }
    return s;
}

TrainSet clean_equals_noisy(int width, int n_rows, int n_angles) {
    TrainSet ts;
    NormalizedStack a = make_stack(width, n_rows, n_angles, 11, 0.0);
    NormalizedStack b = make_stack(width, n_rows, n_angles, 13, 0.0);
    ts.train.push_back({a, a});
    ts.val.push_back({b, b});
    return ts;
}

TrainSet noisy_dataset(int width, int n_rows, int n_angles, double sigma) {
    TrainSet ts;
    NormalizedStack tc = make_stack(width, n_rows, n_angles, 21, 0.0);
    NormalizedStack tn = tc;
    {
        std::mt19937_64 rng(23);
        std::normal_distribution<double> noise(0.0, sigma);
        for (double& x : tn.data) x += noise(rng);
    }
    NormalizedStack vc = make_stack(width, n_rows, n_angles, 29, 0.0);
    NormalizedStack vn = vc;
    {
        std::mt19937_64 rng(31);
        std::normal_distribution<double> noise(0.0, sigma);
        for (double& x : vn.data) x += noise(rng);
    }
    ts.train.push_back({tn, tc});
    ts.val.push_back({vn, vc});
    return ts;
}

HsiNetConfig tiny_hsi() {
    HsiNetConfig c;
    c.k_bands = 8;
    c.spatial_channels = 2;
    c.spectral_channels = 2;
    c.trunk_channels = 8;
    c.n_blocks = 2;
    c.cbam_reduction = 4;
    return c;
}

VideoNetConfig tiny_video() {
    VideoNetConfig c;
    c.patchcraft.patch_len = 3;
    c.patchcraft.n_neighbors = 2;
    c.patchcraft.angle_window = 1;
    c.patchcraft.offsets = {0};
    c.sep_channels = 2;
    c.n_sepconv = 1;
    c.conv2d_channels = 2;
    c.conv1d_channels = 3;
    c.n_conv1d = 2;
    return c;
}

TrainConfig tiny_cfg() {
    TrainConfig c;
    c.k_adjacent_bands = 8;
    c.n_nearest_neighbors = 2;
    c.n_denoise_blocks = 2;
    c.n_octave_blocks = 2;
    c.batch_size = 4;
    c.max_epochs = 4;
    c.patience = 2;
    c.threads = 2;
    c.seed = 5;
    return c;
}

std::vector<std::uint64_t> bits_of(const std::vector<Param*>& ps) {
    std::vector<std::uint64_t> out;
    for (const Param* p : ps)
        for (double x : p->value.v) out.push_back(std::bit_cast<std::uint64_t>(x));
    return out;
}

}  // namespace

TEST_CASE("train config invariants") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    SUBCASE("negative lr") {
        c.lr_hsinet = -1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("alpha bounds") {
        c.alpha_octave = 1.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
        c.alpha_octave = 0.0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("patience") {
        c.patience = 0;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
    SUBCASE("block identity") {
        c.n_octave_blocks = 5;
        CHECK_THROWS_AS(c.validate(), ConfigError);
    }
}

TEST_CASE("adam with zero gradient leaves parameters untouched") {
    Param p;
    p.name = "p";
    p.value = Tensor({3}, {1.0, -2.0, 0.5});
    Adam adam(0.1);
    adam.step({&p});
    CHECK(p.value.v == std::vector<double>{1.0, -2.0, 0.5});
}

TEST_CASE("adam first step moves by ~lr in the gradient sign") {
    Param p;
    p.name = "p";
    p.value = Tensor({2}, {1.0, 1.0});
    p.grad = Tensor({2}, {3.0, -0.25});
    Adam adam(0.01);
    adam.step({&p});
    // bias-corrected first step: mhat = g, vhat = g^2 → step = lr·g/(|g|+eps)
    CHECK(p.value.v[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
    CHECK(p.value.v[1] == doctest::Approx(1.0 + 0.01).epsilon(1e-6));
}

TEST_CASE("enumerate_lines covers every line once, stride subsamples") {
    TrainSet ts = clean_equals_noisy(12, 3, 4);
    auto all = enumerate_lines(ts.train);
    CHECK(all.size() == 3u * 4u);
    auto strided = enumerate_lines(ts.train, 5);
    CHECK(strided.size() == (12u + 4u) / 5u);
    CHECK_THROWS_AS(enumerate_lines(ts.train, 0), ConfigError);
}

TEST_CASE("identity start on noisy==GT: zero loss, exact early stop, weights unchanged") {
    const int width = 16;
    TrainSet ts = clean_equals_noisy(width, 8, 4);
    TrainConfig cfg = tiny_cfg();
    cfg.max_epochs = 6;
    cfg.patience = 2;

    HsiNet net(tiny_hsi(), 41);
    auto before = bits_of(net.params());
    auto hist = train_hsinet(net, ts, cfg);

    // every epoch is non-improving against the perfect initial validation
    REQUIRE(hist.size() == 2);
    for (const auto& r : hist) {
        CHECK(r.train_mse == 0.0);
        CHECK(r.val_mse == 0.0);
    }
    CHECK(bits_of(net.params()) == before);
}

TEST_CASE("loss history length never exceeds max epochs") {
    TrainSet ts = noisy_dataset(16, 8, 4, 0.05);
    TrainConfig cfg = tiny_cfg();
    cfg.max_epochs = 3;
    cfg.patience = 50;  // never triggers
    HsiNet net(tiny_hsi(), 43);
    auto hist = train_hsinet(net, ts, cfg);
    CHECK(hist.size() == 3);
    for (std::size_t i = 0; i < hist.size(); ++i) CHECK(hist[i].epoch == static_cast<int>(i));
}

TEST_CASE("toy hsinet run improves validation MSE vs epoch 0") {
    TrainSet ts = noisy_dataset(16, 8, 4, 0.05);
    TrainConfig cfg = tiny_cfg();
    cfg.lr_hsinet = 1e-3;  // toy-size rate; the paper rate is for full scale
    cfg.max_epochs = 6;
    cfg.patience = 3;

    HsiNet net(tiny_hsi(), 47);
    auto hist = train_hsinet(net, ts, cfg);
    REQUIRE(hist.size() >= 2);
    double best = hist.front().val_mse;
    for (const auto& r : hist) best = std::min(best, r.val_mse);
    CHECK(best < hist.front().val_mse);

    // best-val restore: forward loss at returned weights matches the best row,
    // checked through a fresh validation pass
    double noisy_mse = 0.0;
    {
        const TrainPair& sp = ts.val[0];
        KahanSum ks;
        for (std::size_t i = 0; i < sp.noisy.data.size(); ++i) {
            double d = sp.noisy.data[i] - sp.clean.data[i];
            ks.add(d * d);
        }
        noisy_mse = ks.value() / static_cast<double>(sp.noisy.data.size());
    }
    // denoised val MSE should not be worse than twice the raw noise level
    // (loose sanity bound; the acceptance run measures real PSNR gains)
    CHECK(best < 2.0 * noisy_mse);
}

TEST_CASE("training is bit-identical across thread counts") {
    TrainSet ts = noisy_dataset(12, 8, 4, 0.05);
    TrainConfig base = tiny_cfg();
    base.lr_hsinet = 1e-3;
    base.max_epochs = 2;
    base.steps_per_epoch = 3;

    TrainConfig c1 = base, c4 = base;
    c1.threads = 1;
    c4.threads = 4;

    HsiNet n1(tiny_hsi(), 53), n4(tiny_hsi(), 53);
    auto h1 = train_hsinet(n1, ts, c1);
    auto h4 = train_hsinet(n4, ts, c4);

    REQUIRE(h1.size() == h4.size());
    for (std::size_t i = 0; i < h1.size(); ++i) {
        CHECK(std::bit_cast<std::uint64_t>(h1[i].train_mse) == std::bit_cast<std::uint64_t>(h4[i].train_mse));
        CHECK(std::bit_cast<std::uint64_t>(h1[i].val_mse) == std::bit_cast<std::uint64_t>(h4[i].val_mse));
    }
    CHECK(bits_of(n1.params()) == bits_of(n4.params()));
}

TEST_CASE("videonet toy training runs and does not degrade") {
    TrainSet ts = noisy_dataset(12, 4, 5, 0.05);
    TrainConfig cfg = tiny_cfg();
    cfg.lr_videonet = 1e-3;
    cfg.max_epochs = 3;
    cfg.patience = 2;
    cfg.steps_per_epoch = 4;

    VideoNet net(tiny_video(), 59);
    auto hist = train_videonet(net, ts, cfg);
    REQUIRE(!hist.empty());
    // identity init: epoch-0 val can only be ≥ the best the run settles on
    double best = hist.front().val_mse;
    for (const auto& r : hist) best = std::min(best, r.val_mse);
    CHECK(best <= hist.front().val_mse);
    CHECK(std::isfinite(hist.back().train_mse));
}

TEST_CASE("combiner training freezes upstream weights bit for bit") {
    TrainSet ts = noisy_dataset(12, 8, 4, 0.05);
    TrainConfig cfg = tiny_cfg();
    cfg.max_epochs = 2;
    cfg.steps_per_epoch = 2;

    HsiNet hsi(tiny_hsi(), 61);
    VideoNet video(tiny_video(), 67);
    // give the upstreams non-trivial finals so penultimate features matter
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (Param* p : hsi.params())
        for (double& x : p->value.v)
            if (x == 0.0) x = u(rng) * 0.01;

    auto hsi_before = bits_of(hsi.params());
    auto video_before = bits_of(video.params());

    Combiner comb(hsi.penultimate_channels(), video.penultimate_channels(), 73);
    comb.warm_start_from(hsi);
    auto hist = train_combiner(comb, hsi, video, ts, cfg);

    CHECK(!hist.empty());
    CHECK(bits_of(hsi.params()) == hsi_before);
    CHECK(bits_of(video.params()) == video_before);
}

TEST_CASE("dncnn toy training improves on noisy patches") {
    TrainSet ts = noisy_dataset(12, 4, 12, 0.1);
    TrainConfig cfg = tiny_cfg();
    cfg.n_nearest_neighbors = 5;  // unused by dncnn
    cfg.lr_dncnn = 1e-3;
    cfg.max_epochs = 4;
    cfg.patience = 3;
    cfg.steps_per_epoch = 6;

    DnCnnConfig dc;
    dc.channels = 4;
    dc.n_hidden = 2;
    DnCnn net(dc, 79);
    auto hist = train_dncnn(net, ts, cfg, 8);
    REQUIRE(!hist.empty());
    double best = hist.front().val_mse;
    for (const auto& r : hist) best = std::min(best, r.val_mse);
    CHECK(best <= hist.front().val_mse);
}

TEST_CASE("non-finite loss aborts naming the batch") {
    TrainSet ts = noisy_dataset(12, 8, 4, 0.05);
    ts.train[0].noisy.data[5] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig cfg = tiny_cfg();
    cfg.threads = 1;

    HsiNet net(tiny_hsi(), 83);
#ifdef NDEBUG
    CHECK_THROWS_WITH_AS(train_hsinet(net, ts, cfg), doctest::Contains("non-finite"), NumericError);
#else
    // debug builds trip the tape's finite check first; either way it aborts
    CHECK_THROWS(train_hsinet(net, ts, cfg));
#endif
}

TEST_CASE("mismatched network/config geometry is rejected") {
    TrainSet ts = clean_equals_noisy(12, 8, 4);
    TrainConfig cfg = tiny_cfg();
    cfg.k_adjacent_bands = 16;  // net has 8
    HsiNet net(tiny_hsi(), 89);
    CHECK_THROWS_AS(train_hsinet(net, ts, cfg), ConfigError);

    TrainConfig vcfg = tiny_cfg();
    vcfg.n_nearest_neighbors = 7;  // net has 2
    VideoNet vnet(tiny_video(), 91);
    CHECK_THROWS_AS(train_videonet(vnet, ts, vcfg), ConfigError);
}
