#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "msct/autograd.hpp"

namespace msct {

/*** Named trainable tensor with accumulated gradient and Adam moments. The
 * moment buffers stay empty until the optimizer first touches the param. */
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m, v;
};

void zero_grad(Param& p);

/*** Fan-in He initialization, N(0, sqrt(2/fan_in)), deterministic per seed. */
void he_init(Param& p, int fan_in, std::uint64_t seed);

std::uint64_t layer_seed(std::uint64_t master, const std::string& name);

/*** Binds Params to tape leaves for one forward/backward pass and harvests
 * their gradients afterwards. In frozen mode params still enter the tape but
 * are not recorded, so they never receive updates. alias() lets a caller
 * substitute an existing node for a param (gradient checks, weight sharing). */
class Binder {
public:
    explicit Binder(Tape& t) : tape_(&t) {}

    int bind(Param& p);
    void set_frozen(bool f) { frozen_ = f; }
    void alias(Param* p, int id) { aliases_[p] = id; }

    std::size_t bound_count() const { return bound_.size(); }

    /*** Param::grad += tape gradient, for single-threaded updates. */
    void harvest();

    /*** Gradients aligned with `order` (zeros where a param was never bound
     * or never touched); workers return these sinks and the trainer merges
     * them in line order. */
    std::vector<Tensor> harvest(const std::vector<Param*>& order) const;

private:
    Tape* tape_;
    bool frozen_ = false;
    std::vector<std::pair<Param*, int>> bound_;
    std::unordered_map<Param*, int> aliases_;
};

// ---- layer containers ----

struct Conv1d {
    Param w, b;  // w [Cout, Cin, K], b [Cout]
};
Conv1d make_conv1d(const std::string& name, int cout, int cin, int k, std::uint64_t seed);
Conv1d make_conv1d_zero(const std::string& name, int cout, int cin, int k);
int conv1d_fwd(Tape& t, Binder& bi, Conv1d& l, int x, int axis = 1, Pad pad = Pad::same);

struct Conv2dLayer {
    Param w, b;  // w [Cout, Cin, KH, KW]
};
Conv2dLayer make_conv2d(const std::string& name, int cout, int cin, int kh, int kw,
                        std::uint64_t seed);
Conv2dLayer make_conv2d_zero(const std::string& name, int cout, int cin, int kh, int kw);
int conv2d_fwd(Tape& t, Binder& bi, Conv2dLayer& l, int x);

struct Dense {
    Param w, b;  // w [Cout, Cin]
};
Dense make_dense(const std::string& name, int cout, int cin, std::uint64_t seed);
int dense_fwd(Tape& t, Binder& bi, Dense& l, int x);

struct BatchNorm {
    Param gamma, beta;  // [C], start at 1 / 0
};
BatchNorm make_batchnorm(const std::string& name, int c);
int batchnorm_fwd(Tape& t, Binder& bi, BatchNorm& l, int x);

/*** Convolutional block attention: channel stage (global max/avg -> shared
 * two-layer MLP -> add -> sigmoid -> per-channel scale) then spatial stage on
 * the refined features (channel max/avg -> concat -> k-wide conv -> sigmoid
 * -> per-position scale). Input rank 2, [C, L]. */
struct Cbam {
    Dense fc1, fc2;
    Conv1d spatial;
};
Cbam make_cbam(const std::string& name, int c, int reduction, std::uint64_t seed,
               int spatial_kernel = 7);
int cbam_fwd(Tape& t, Binder& bi, Cbam& l, int x);

/*** round(alpha * c) low-frequency channels, remainder high; both >= 1. */
std::pair<int, int> octave_channels(int c, double alpha);

/*** Full-resolution input -> (high [Ch, L], low [Cl, ceil(L/2)]). */
struct OctaveSplit {
    Conv1d high, low;
};
OctaveSplit make_octave_split(const std::string& name, int cin, int ch_high, int ch_low, int k,
                              std::uint64_t seed);
std::pair<int, int> octave_split_fwd(Tape& t, Binder& bi, OctaveSplit& l, int x);

/*** Four-path 1-D octave convolution (hh, conv->pool hl, conv->upsample lh,
 * ll), ReLU, per-stream CBAM, residual skip on both streams. */
struct OctaveBlock {
    Conv1d hh, hl, lh, ll;
    Cbam att_high, att_low;
};
OctaveBlock make_octave_block(const std::string& name, int ch_high, int ch_low, int k,
                              int cbam_reduction, std::uint64_t seed);
std::pair<int, int> octave_block_fwd(Tape& t, Binder& bi, OctaveBlock& l, int h, int lo);

/*** (high, low) -> full-resolution [Cout, L]: hh(high) + upsample(lh(low)). */
struct OctaveMerge {
    Conv1d high, low;
};
OctaveMerge make_octave_merge(const std::string& name, int ch_high, int ch_low, int cout, int k,
                              std::uint64_t seed);
int octave_merge_fwd(Tape& t, Binder& bi, OctaveMerge& l, int h, int lo);

/*** Separable 3-D convolution on [C, groups, neighbors, W]: 1-D convolutions
 * along W, then the group axis, then the neighbor axis. */
struct SepConv {
    Conv1d spatial, group, neighbor;
};
SepConv make_sepconv(const std::string& name, int cout, int cin, int k_spatial,
                     std::uint64_t seed);
int sepconv_fwd(Tape& t, Binder& bi, SepConv& l, int x);

// param listing helpers (stable order, matches forward bind order)
void collect(std::vector<Param*>& out, Conv1d& l);
void collect(std::vector<Param*>& out, Conv2dLayer& l);
void collect(std::vector<Param*>& out, Dense& l);
void collect(std::vector<Param*>& out, BatchNorm& l);
void collect(std::vector<Param*>& out, Cbam& l);
void collect(std::vector<Param*>& out, OctaveSplit& l);
void collect(std::vector<Param*>& out, OctaveBlock& l);
void collect(std::vector<Param*>& out, OctaveMerge& l);
void collect(std::vector<Param*>& out, SepConv& l);

}  // namespace msct
