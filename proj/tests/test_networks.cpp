#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "msct/networks.hpp"

using namespace msct;

namespace {

Tensor rand_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& x : t.v) x = u(rng);
    return t;
}

std::vector<double> rand_band(int width, int n_angles, std::uint64_t seed) {
    std::vector<double> b(static_cast<std::size_t>(width) * n_angles);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& x : b) x = u(rng);
    return b;
}

void zero_all(const std::vector<Param*>& ps) {
    for (Param* p : ps) std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
}

VideoNetConfig toy_video_cfg() {
    VideoNetConfig cfg;
    cfg.patchcraft.patch_len = 3;
    cfg.patchcraft.n_neighbors = 2;
    cfg.patchcraft.angle_window = 1;
    cfg.patchcraft.offsets = {0};
    cfg.sep_channels = 2;
    cfg.n_sepconv = 1;
    cfg.conv2d_channels = 2;
    cfg.conv1d_channels = 3;
    cfg.n_conv1d = 3;
    return cfg;
}

}  // namespace

TEST_CASE("window_rows clamps edges and centres the target") {
    CHECK(window_rows(10, 5, 4) == std::vector<int>{4, 5, 6, 7});
    CHECK(window_rows(10, 0, 5) == std::vector<int>{0, 0, 0, 1, 2});
    CHECK(window_rows(10, 9, 5) == std::vector<int>{7, 8, 9, 9, 9});
    CHECK(window_rows(3, 1, 7) == std::vector<int>{0, 0, 0, 1, 2, 2, 2});
    CHECK(window_target_index(5) == 2);
    CHECK(window_target_index(64) == 31);
    auto w = window_rows(64, 0, 64);
    CHECK(w[static_cast<std::size_t>(window_target_index(64))] == 0);
    auto w2 = window_rows(64, 63, 64);
    CHECK(w2[static_cast<std::size_t>(window_target_index(64))] == 63);
    CHECK_THROWS_AS(window_rows(10, 10, 4), ConfigError);
    CHECK_THROWS_AS(window_rows(10, 2, 0), ConfigError);
}

TEST_CASE("hsi_window pulls clamped rows from the stack") {
    NormalizedStack s;
    s.width = 4;
    s.n_rows = 3;
    s.n_angles = 2;
    s.data.resize(static_cast<std::size_t>(4) * 3 * 2);
    for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = static_cast<double>(i);
    Tensor w = hsi_window(s, 0, 1, 3);
    CHECK(w.shape == std::vector<int>{3, 4});
    // rows {0,0,1} at angle 1
    for (int x = 0; x < 4; ++x) {
        CHECK(w.v[static_cast<std::size_t>(x)] == s.data[s.index(x, 0, 1)]);
        CHECK(w.v[static_cast<std::size_t>(4 + x)] == s.data[s.index(x, 0, 1)]);
        CHECK(w.v[static_cast<std::size_t>(8 + x)] == s.data[s.index(x, 1, 1)]);
    }
    CHECK_THROWS_AS(hsi_window(s, 0, 2, 3), ConfigError);
}

TEST_CASE("hsinet: zero-initialized final gives the exact identity") {
    HsiNetConfig cfg;  // defaults: k=64, trunk 32, 6 blocks
    HsiNet net(cfg, 123);
    for (int width : {64, 256}) {
        CAPTURE(width);
        Tensor win = rand_tensor({cfg.k_bands, width}, 1000 + static_cast<std::uint64_t>(width));
        Tape t;
        Binder bi(t);
        auto out = net.forward(t, bi, t.leaf(win), window_target_index(cfg.k_bands));
        REQUIRE(t.val(out.line).shape == std::vector<int>{width});
        REQUIRE(t.val(out.penultimate).shape == std::vector<int>{cfg.trunk_channels, width});
        const int ti = window_target_index(cfg.k_bands);
        for (int x = 0; x < width; ++x)
            CHECK(t.val(out.line).v[static_cast<std::size_t>(x)] ==
                  win.v[static_cast<std::size_t>(ti) * width + x]);
    }
}

TEST_CASE("hsinet: all-zero weights still compute the identity") {
    HsiNetConfig cfg;
    cfg.k_bands = 8;
    cfg.spatial_channels = 2;
    cfg.spectral_channels = 2;
    cfg.trunk_channels = 8;
    cfg.n_blocks = 2;
    cfg.cbam_reduction = 4;
    HsiNet net(cfg, 5);
    zero_all(net.params());
    Tensor win = rand_tensor({8, 20}, 77);
    Tape t;
    Binder bi(t);
    auto out = net.forward(t, bi, t.leaf(win), 3);
    for (int x = 0; x < 20; ++x)
        CHECK(t.val(out.line).v[static_cast<std::size_t>(x)] == win.v[static_cast<std::size_t>(3 * 20 + x)]);

    // window contract enforced
    Tape t2;
    Binder bi2(t2);
    CHECK_THROWS_AS(net.forward(t2, bi2, t2.leaf(rand_tensor({7, 20}, 3)), 3), DataError);
    CHECK_THROWS_AS(net.forward(t2, bi2, t2.leaf(win), 8), DataError);
}

TEST_CASE("videonet: zero-initialized residual stages give the exact identity") {
    const int width = 32, n_angles = 6;
    VideoNetConfig cfg = toy_video_cfg();
    VideoNet net(cfg, 9);
    auto band = rand_band(width, n_angles, 11);
    for (int angle : {0, 3, 5}) {
        VideoSample s = make_video_sample(band, width, n_angles, angle, cfg.patchcraft);
        Tape t;
        Binder bi(t);
        auto out = net.forward(t, bi, t.leaf(s.input), t.leaf(s.target), t.leaf(s.angular));
        REQUIRE(t.val(out.line).shape == std::vector<int>{width});
        REQUIRE(t.val(out.penultimate).shape == std::vector<int>{cfg.conv1d_channels, width});
        for (int x = 0; x < width; ++x)
            CHECK(t.val(out.line).v[static_cast<std::size_t>(x)] ==
                  band[static_cast<std::size_t>(angle) * width + x]);
    }

    SUBCASE("fully zeroed weights too") {
        zero_all(net.params());
        VideoSample s = make_video_sample(band, width, n_angles, 2, cfg.patchcraft);
        Tape t;
        Binder bi(t);
        auto out = net.forward(t, bi, t.leaf(s.input), t.leaf(s.target), t.leaf(s.angular));
        for (int x = 0; x < width; ++x)
            CHECK(t.val(out.line).v[static_cast<std::size_t>(x)] ==
                  band[static_cast<std::size_t>(2) * width + x]);
    }
}

TEST_CASE("make_video_sample: planes and angular clamping") {
    const int width = 16, n_angles = 4;
    auto band = rand_band(width, n_angles, 21);
    PatchCraftConfig pc;
    pc.patch_len = 3;
    pc.n_neighbors = 2;
    pc.angle_window = 2;
    pc.offsets = {0, 1};
    VideoSample s = make_video_sample(band, width, n_angles, 0, pc);
    REQUIRE(s.input.shape == std::vector<int>{3, 2, 2, width});
    PatchFrames pf = patch_craft_frames(band, width, n_angles, 0, pc);
    const std::size_t plane = static_cast<std::size_t>(2) * 2 * width;
    for (std::size_t i = 0; i < plane; ++i) CHECK(s.input.v[i] == pf.frames[i]);
    for (int o = 0; o < 2; ++o)
        for (int n = 0; n < 2; ++n)
            for (int w = 0; w < width; ++w) {
                std::size_t i = (static_cast<std::size_t>(o) * 2 + n) * width + w;
                CHECK(s.input.v[plane + i] == band[static_cast<std::size_t>(w)]);
                CHECK(s.input.v[2 * plane + i] == pf.distance[static_cast<std::size_t>(w)]);
            }
    // target angle 0 with window 2: rows clamp to {0,0,0,1,2}
    REQUIRE(s.angular.shape == std::vector<int>{5, width});
    for (int w = 0; w < width; ++w) {
        CHECK(s.angular.v[static_cast<std::size_t>(w)] == band[static_cast<std::size_t>(w)]);
        CHECK(s.angular.v[static_cast<std::size_t>(2 * width + w)] == band[static_cast<std::size_t>(w)]);
        CHECK(s.angular.v[static_cast<std::size_t>(4 * width + w)] ==
              band[static_cast<std::size_t>(2) * width + w]);
    }
}

TEST_CASE("videonet: full-network gradient check at toy size < 1e-3") {
    const int width = 16, n_angles = 3;
    VideoNetConfig cfg = toy_video_cfg();
    VideoNet net(cfg, 31);
    // Randomize every parameter, biases and batchnorm affines included.  With
    // zero biases some conv pre-activations are exactly 0.0 (a receptive field
    // of dead relu outputs sums to the bias), which parks relu on its kink
    // where finite differences and the subgradient disagree at any step size.
    std::vector<Param*> ps = net.params();
    for (Param* p : ps) {
        std::mt19937_64 rng(layer_seed(55, p->name));
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (double& x : p->value.v) x = u(rng);
    }

    auto band = rand_band(width, n_angles, 41);
    VideoSample s = make_video_sample(band, width, n_angles, 1, cfg.patchcraft);

    std::vector<Tensor> inputs{s.input, s.target, s.angular, rand_tensor({width}, 43)};
    for (Param* p : ps) inputs.push_back(p->value);

    auto rep = gradient_check(
        [&](Tape& t, const std::vector<int>& in) {
            Binder bi(t);
            for (std::size_t i = 0; i < ps.size(); ++i) bi.alias(ps[i], in[i + 4]);
            auto out = net.forward(t, bi, in[0], in[1], in[2]);
            return mse(t, out.line, in[3]);
        },
        inputs);
    INFO(rep.str());
    CHECK(rep.pass(1e-3));
}

TEST_CASE("combiner: warm start reproduces hsinet bit for bit") {
    HsiNetConfig hcfg;
    hcfg.k_bands = 8;
    hcfg.spatial_channels = 2;
    hcfg.spectral_channels = 2;
    hcfg.trunk_channels = 8;
    hcfg.n_blocks = 2;
    hcfg.cbam_reduction = 4;
    HsiNet hsi(hcfg, 61);
    he_init(hsi.final_conv().w, 24, 67);  // non-trivial final layer
    hsi.final_conv().b.value.v[0] = 0.31;

    const int width = 20, n_angles = 5;
    VideoNetConfig vcfg = toy_video_cfg();
    VideoNet video(vcfg, 71);

    auto band = rand_band(width, n_angles, 73);
    VideoSample vs = make_video_sample(band, width, n_angles, 2, vcfg.patchcraft);
    Tensor win = rand_tensor({hcfg.k_bands, width}, 79);

    Combiner comb(hsi.penultimate_channels(), video.penultimate_channels(), 83);
    comb.warm_start_from(hsi);

    Tape t;
    Binder bi(t);
    auto ho = hsi.forward(t, bi, t.leaf(win), window_target_index(hcfg.k_bands));
    auto vo = video.forward(t, bi, t.leaf(vs.input), t.leaf(vs.target), t.leaf(vs.angular));
    int target = slice0(t, reshape(t, t.leaf(win), {hcfg.k_bands, width}),
                        window_target_index(hcfg.k_bands), window_target_index(hcfg.k_bands) + 1);
    int cl = comb.forward(t, bi, ho.penultimate, vo.penultimate, target);

    REQUIRE(t.val(cl).shape == std::vector<int>{width});
    for (int x = 0; x < width; ++x)
        CHECK(t.val(cl).v[static_cast<std::size_t>(x)] == t.val(ho.line).v[static_cast<std::size_t>(x)]);

    SUBCASE("feature width mismatch rejected") {
        Tape t2;
        Binder b2(t2);
        int a = t2.leaf(rand_tensor({8, 20}, 89));
        int b = t2.leaf(rand_tensor({3, 19}, 91));
        int tg = t2.leaf(rand_tensor({1, 20}, 93));
        CHECK_THROWS_AS(comb.forward(t2, b2, a, b, tg), DataError);
    }
}

TEST_CASE("dncnn: identity at init, fingerprinted depth") {
    DnCnnConfig cfg;
    CHECK(cfg.n_hidden == 18);
    DnCnn big(cfg, 97);
    CHECK(big.arch_spec().find("hidden=18") != std::string::npos);
    CHECK(big.params().size() == 2 + 18 * 4 + 2);  // first w/b + 18x(conv w/b + bn g/b) + final w/b

    DnCnnConfig small;
    small.channels = 2;
    small.n_hidden = 1;
    DnCnn net(small, 101);
    Tensor patch = rand_tensor({1, 5, 6}, 103);
    Tape t;
    Binder bi(t);
    int y = net.forward(t, bi, t.leaf(patch));
    REQUIRE(t.val(y).shape == patch.shape);
    for (std::size_t i = 0; i < patch.v.size(); ++i) CHECK(t.val(y).v[i] == patch.v[i]);
}

TEST_CASE("dncnn: gradient check < 1e-4") {
    DnCnnConfig cfg;
    cfg.channels = 2;
    cfg.n_hidden = 1;
    DnCnn net(cfg, 107);
    std::vector<Param*> ps = net.params();
    he_init(*ps.back(), 18, 109);  // bias of final — give it a value
    he_init(*ps[ps.size() - 2], 18, 111);  // final conv weights

    std::vector<Tensor> inputs{rand_tensor({1, 4, 5}, 113), rand_tensor({1, 4, 5}, 127)};
    for (Param* p : ps) inputs.push_back(p->value);
    auto rep = gradient_check(
        [&](Tape& t, const std::vector<int>& in) {
            Binder bi(t);
            for (std::size_t i = 0; i < ps.size(); ++i) bi.alias(ps[i], in[i + 2]);
            return mse(t, net.forward(t, bi, in[0]), in[1]);
        },
        inputs);
    INFO(rep.str());
    CHECK(rep.pass(1e-4));
}

TEST_CASE("arch specs are deterministic and distinguish configs") {
    HsiNetConfig a, b;
    b.trunk_channels = 16;
    CHECK(HsiNet(a, 1).arch_spec() == HsiNet(a, 2).arch_spec());
    CHECK(HsiNet(a, 1).arch_spec() != HsiNet(b, 1).arch_spec());
    VideoNetConfig v = toy_video_cfg();
    VideoNetConfig v2 = v;
    v2.conv1d_channels = 5;
    CHECK(VideoNet(v, 1).arch_spec() != VideoNet(v2, 1).arch_spec());
}
