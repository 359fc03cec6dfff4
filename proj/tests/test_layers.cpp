#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "msct/layers.hpp"

using namespace msct;

namespace {

Tensor rand_tensor(std::vector<int> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (double& x : t.v) x = u(rng);
    return t;
}

void fill_zero(std::vector<Param*> ps) {
    for (Param* p : ps) std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
}

}  // namespace

TEST_CASE("he init is seeded and scaled") {
    Param a, b;
    a.value = Tensor::zeros({16, 16});
    b.value = Tensor::zeros({16, 16});
    he_init(a, 16, 42);
    he_init(b, 16, 42);
    CHECK(a.value.v == b.value.v);  // same seed, same draw
    he_init(b, 16, 43);
    CHECK(a.value.v != b.value.v);

    double s2 = 0.0;
    for (double x : a.value.v) s2 += x * x;
    s2 /= static_cast<double>(a.value.numel());
    CHECK(s2 == doctest::Approx(2.0 / 16.0).epsilon(0.25));

    zero_grad(a);
    CHECK(a.grad.numel() == a.value.numel());
}

TEST_CASE("binder binds, harvests, freezes, aliases") {
    Conv1d conv = make_conv1d("t/conv", 1, 1, 3, 7);
    std::vector<Param*> order;
    collect(order, conv);
    for (Param* p : order) zero_grad(*p);

    Tensor line({1, 6}, {1, 2, 3, 4, 5, 6});

    SUBCASE("direct harvest accumulates into Param::grad") {
        Tape t;
        Binder bi(t);
        int y = conv1d_fwd(t, bi, conv, t.leaf(line));
        CHECK(bi.bound_count() == 2);
        t.backward(mean_all(t, y));
        bi.harvest();
        double s = 0.0;
        for (double g : conv.w.grad.v) s += std::abs(g);
        CHECK(s > 0.0);
        CHECK(conv.b.grad.v[0] == doctest::Approx(1.0));  // d(mean)/db = 1
    }

    SUBCASE("sink harvest matches direct harvest") {
        Tape t;
        Binder bi(t);
        t.backward(mean_all(t, conv1d_fwd(t, bi, conv, t.leaf(line))));
        std::vector<Tensor> sink = bi.harvest(order);
        REQUIRE(sink.size() == 2);

        Tape t2;
        Binder bi2(t2);
        t2.backward(mean_all(t2, conv1d_fwd(t2, bi2, conv, t2.leaf(line))));
        bi2.harvest();
        CHECK(sink[0].v == conv.w.grad.v);
        CHECK(sink[1].v == conv.b.grad.v);
    }

    SUBCASE("frozen mode still computes but records nothing") {
        Tape t;
        Binder bi(t);
        bi.set_frozen(true);
        int y = conv1d_fwd(t, bi, conv, t.leaf(line));
        CHECK(bi.bound_count() == 0);
        t.backward(mean_all(t, y));
        auto sink = bi.harvest(order);
        for (const Tensor& g : sink)
            for (double x : g.v) CHECK(x == 0.0);
    }

    SUBCASE("alias routes the gradient to the substituted node") {
        Tape t;
        Binder bi(t);
        int wnode = t.leaf(conv.w.value);
        bi.alias(&conv.w, wnode);
        t.backward(mean_all(t, conv1d_fwd(t, bi, conv, t.leaf(line))));
        CHECK(t.has_grad(wnode));
    }
}

TEST_CASE("cbam: zero weights give exactly input/4") {
    Cbam att = make_cbam("t/att", 3, 2, 5);
    std::vector<Param*> ps;
    collect(ps, att);
    fill_zero(ps);

    Tensor x = rand_tensor({3, 9}, 11, -2.0, 2.0);
    Tape t;
    Binder bi(t);
    int y = cbam_fwd(t, bi, att, t.leaf(x));
    REQUIRE(t.val(y).shape == x.shape);
    for (std::size_t i = 0; i < x.v.size(); ++i) CHECK(t.val(y).v[i] == 0.25 * x.v[i]);
}

TEST_CASE("cbam: attention strictly attenuates") {
    Cbam att = make_cbam("t/att2", 4, 2, 17);
    Tensor x = rand_tensor({4, 8}, 13, 0.5, 2.0);
    Tape t;
    Binder bi(t);
    int y = cbam_fwd(t, bi, att, t.leaf(x));
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        CHECK(std::abs(t.val(y).v[i]) < std::abs(x.v[i]));
        CHECK(t.val(y).v[i] * x.v[i] > 0.0);  // maps in (0,1) never flip sign
    }
}

TEST_CASE("cbam: channel permutation equivariance") {
    const int c = 4;
    Cbam att = make_cbam("t/att3", c, 2, 23);
    Tensor x = rand_tensor({c, 6}, 29);

    Tape t;
    Binder bi(t);
    Tensor y = t.val(cbam_fwd(t, bi, att, t.leaf(x)));

    // reverse the channels of the input and of the MLP accordingly
    std::vector<int> perm{3, 2, 1, 0};
    Tensor xp({c, 6});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 6; ++i)
            xp.v[static_cast<std::size_t>(ch * 6 + i)] =
                x.v[static_cast<std::size_t>(perm[static_cast<std::size_t>(ch)] * 6 + i)];

    Cbam attp = make_cbam("t/att3", c, 2, 23);  // identical weights, then permute
    int hidden = attp.fc1.w.value.dim(0);
    for (int h = 0; h < hidden; ++h)
        for (int ch = 0; ch < c; ++ch)
            attp.fc1.w.value.v[static_cast<std::size_t>(h * c + ch)] =
                att.fc1.w.value.v[static_cast<std::size_t>(h * c + perm[static_cast<std::size_t>(ch)])];
    for (int ch = 0; ch < c; ++ch) {
        for (int h = 0; h < hidden; ++h)
            attp.fc2.w.value.v[static_cast<std::size_t>(ch * hidden + h)] =
                att.fc2.w.value.v[static_cast<std::size_t>(perm[static_cast<std::size_t>(ch)] * hidden + h)];
        attp.fc2.b.value.v[static_cast<std::size_t>(ch)] =
            att.fc2.b.value.v[static_cast<std::size_t>(perm[static_cast<std::size_t>(ch)])];
    }

    Tape t2;
    Binder bi2(t2);
    Tensor yp = t2.val(cbam_fwd(t2, bi2, attp, t2.leaf(xp)));
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < 6; ++i)
            CHECK(yp.v[static_cast<std::size_t>(ch * 6 + i)] ==
                  doctest::Approx(y.v[static_cast<std::size_t>(perm[static_cast<std::size_t>(ch)] * 6 + i)])
                      .epsilon(1e-12));
}

TEST_CASE("octave channel split arithmetic") {
    CHECK(octave_channels(20, 0.1) == std::pair<int, int>{18, 2});
    CHECK(octave_channels(32, 0.1) == std::pair<int, int>{29, 3});
    CHECK(octave_channels(2, 0.1) == std::pair<int, int>{1, 1});  // clamped to one low channel
    CHECK_THROWS_AS(octave_channels(1, 0.1), ConfigError);
    CHECK_THROWS_AS(octave_channels(8, 0.0), ConfigError);
    CHECK_THROWS_AS(octave_channels(8, 1.0), ConfigError);
}

TEST_CASE("octave split and merge shapes, odd width") {
    OctaveSplit sp = make_octave_split("t/split", 2, 3, 1, 3, 31);
    OctaveMerge mg = make_octave_merge("t/merge", 3, 1, 2, 3, 37);
    Tensor x = rand_tensor({2, 7}, 41);
    Tape t;
    Binder bi(t);
    auto [h, lo] = octave_split_fwd(t, bi, sp, t.leaf(x));
    CHECK(t.val(h).shape == std::vector<int>{3, 7});
    CHECK(t.val(lo).shape == std::vector<int>{1, 4});
    int y = octave_merge_fwd(t, bi, mg, h, lo);
    CHECK(t.val(y).shape == std::vector<int>{2, 7});
}

TEST_CASE("octave block: zero cross paths decouple the streams") {
    OctaveBlock blk = make_octave_block("t/blk", 3, 1, 3, 8, 43);
    std::fill(blk.hl.w.value.v.begin(), blk.hl.w.value.v.end(), 0.0);
    std::fill(blk.hl.b.value.v.begin(), blk.hl.b.value.v.end(), 0.0);
    std::fill(blk.lh.w.value.v.begin(), blk.lh.w.value.v.end(), 0.0);
    std::fill(blk.lh.b.value.v.begin(), blk.lh.b.value.v.end(), 0.0);

    Tensor h = rand_tensor({3, 8}, 47);
    Tensor l1 = rand_tensor({1, 4}, 53);
    Tensor l2 = rand_tensor({1, 4}, 59);

    auto run = [&](const Tensor& hl_in, const Tensor& lo_in) {
        Tape t;
        Binder bi(t);
        auto [oh, ol] = octave_block_fwd(t, bi, blk, t.leaf(hl_in), t.leaf(lo_in));
        return std::pair(t.val(oh).v, t.val(ol).v);
    };
    auto [h1, lo1] = run(h, l1);
    auto [h2, lo2] = run(h, l2);
    CHECK(h1 == h2);    // high stream blind to low input
    CHECK(lo1 != lo2);  // low stream still alive

    // mismatched low length rejected
    Tape t;
    Binder bi(t);
    CHECK_THROWS_AS(octave_block_fwd(t, bi, blk, t.leaf(h), t.leaf(rand_tensor({1, 3}, 61))),
                    DataError);
}

TEST_CASE("gradient check: full 4-path octave pipeline < 1e-4") {
    OctaveSplit sp = make_octave_split("g/split", 3, 3, 1, 3, 67);
    OctaveBlock blk = make_octave_block("g/blk", 3, 1, 3, 8, 71);
    OctaveMerge mg = make_octave_merge("g/merge", 3, 1, 2, 3, 73);

    std::vector<Param*> ps;
    collect(ps, sp);
    collect(ps, blk);
    collect(ps, mg);

    std::vector<Tensor> inputs;
    inputs.push_back(rand_tensor({3, 7}, 79, 0.3, 1.0));
    inputs.push_back(rand_tensor({2, 7}, 83));  // mse target
    for (Param* p : ps) inputs.push_back(p->value);

    auto rep = gradient_check(
        [&](Tape& t, const std::vector<int>& in) {
            Binder bi(t);
            for (std::size_t i = 0; i < ps.size(); ++i) bi.alias(ps[i], in[i + 2]);
            auto [h, lo] = octave_split_fwd(t, bi, sp, in[0]);
            auto [h2, lo2] = octave_block_fwd(t, bi, blk, h, lo);
            return mse(t, octave_merge_fwd(t, bi, mg, h2, lo2), in[1]);
        },
        inputs);
    INFO(rep.str());
    CHECK(rep.pass(1e-4));
}

TEST_CASE("sepconv mixes channels along all three axes") {
    SepConv sc = make_sepconv("t/sep", 3, 2, 3, 89);
    Tensor x = rand_tensor({2, 3, 4, 5}, 97);
    Tape t;
    Binder bi(t);
    int y = sepconv_fwd(t, bi, sc, t.leaf(x));
    CHECK(t.val(y).shape == std::vector<int>{3, 3, 4, 5});
    CHECK(bi.bound_count() == 6);
    CHECK_THROWS_AS(sepconv_fwd(t, bi, sc, t.leaf(rand_tensor({2, 4, 5}, 101))), DataError);

    auto rep = gradient_check(
        [&](Tape& t2, const std::vector<int>& in) {
            Binder b2(t2);
            std::vector<Param*> ps;
            collect(ps, sc);
            for (std::size_t i = 0; i < ps.size(); ++i) b2.alias(ps[i], in[i + 1]);
            return mean_all(t2, sepconv_fwd(t2, b2, sc, in[0]));
        },
        [&] {
            std::vector<Tensor> ins{rand_tensor({2, 2, 3, 4}, 103)};
            std::vector<Param*> ps;
            collect(ps, sc);
            for (Param* p : ps) ins.push_back(p->value);
            return ins;
        }());
    INFO(rep.str());
    CHECK(rep.pass(1e-4));
}

TEST_CASE("batchnorm layer starts as plain standardization") {
    BatchNorm bn = make_batchnorm("t/bn", 2);
    CHECK(bn.gamma.value.v == std::vector<double>{1.0, 1.0});
    CHECK(bn.beta.value.v == std::vector<double>{0.0, 0.0});
    Tensor x = rand_tensor({2, 16}, 107, 3.0, 9.0);
    Tape t;
    Binder bi(t);
    const Tensor& y = t.val(batchnorm_fwd(t, bi, bn, t.leaf(x)));
    for (int c = 0; c < 2; ++c) {
        double m = 0.0;
        for (int i = 0; i < 16; ++i) m += y.v[static_cast<std::size_t>(c * 16 + i)];
        CHECK(m / 16.0 == doctest::Approx(0.0).epsilon(1e-12));
    }
}
