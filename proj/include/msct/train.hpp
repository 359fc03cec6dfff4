#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msct/networks.hpp"
#include "msct/weights_io.hpp"

namespace msct {

struct TrainConfig {
    double lr_videonet = 1.5e-2;
    double lr_hsinet = 2.33e-5;
    double lr_combiner = 2.33e-6;  // lr_hsinet / 10
    int n_nearest_neighbors = 5;
    int k_adjacent_bands = 64;
    int n_denoise_blocks = 6;
    int n_octave_blocks = 6;
    double alpha_octave = 0.1;
    int batch_size = 32;
    int max_epochs = 30;
    int patience = 3;
    std::uint64_t seed = 1;

    // engine knobs, not part of the model recipe
    double lr_dncnn = 1e-3;   // baseline net; no published rate
    int threads = 0;          // 0 → hardware concurrency
    int steps_per_epoch = 0;  // 0 → full pass over the training lines
    int val_stride = 1;       // validate on every val_stride-th line
    int dncnn_patch = 32;     // square crop side for the single-frame baseline

    void validate() const;
};

/*** Adam with bias correction; moment buffers live on the Param. */
struct Adam {
    double lr;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;

    explicit Adam(double lr_) : lr(lr_) {}
    void step(const std::vector<Param*>& params);
};

struct TrainPair {
    NormalizedStack noisy;
    NormalizedStack clean;
};

struct TrainSet {
    std::vector<TrainPair> train;
    std::vector<TrainPair> val;
};

/*** One (slice, row, angle) training line. */
struct LineRef {
    int slice = 0;
    int row = 0;
    int angle = 0;
};

std::vector<LineRef> enumerate_lines(const std::vector<TrainPair>& slices, int stride = 1);

/*** Generic deterministic batch trainer. `train_loss` builds the scalar loss
 * node for one line on the given tape (params bound through the binder);
 * `val_loss` is a forward-only evaluation. Batches are shuffled per epoch
 * from the config seed; gradients merge in line order so thread count never
 * changes the result. Returns the loss history; params end at the
 * best-validation snapshot (initial weights count as the first candidate). */
struct TrainHooks {
    std::function<int(const LineRef&, Tape&, Binder&)> train_loss;
    std::function<double(const LineRef&)> val_loss;
};

std::vector<LossRecord> run_training(std::vector<Param*> params, const std::vector<LineRef>& train_lines,
                                     const std::vector<LineRef>& val_lines, const TrainHooks& hooks,
                                     double lr, const TrainConfig& cfg, const std::string& tag);

/*** Per-model trainers. Networks are constructed by the caller so tests and
 * the pipeline can control architecture; trainers only drive the engine. */
std::vector<LossRecord> train_hsinet(HsiNet& net, const TrainSet& data, const TrainConfig& cfg);
std::vector<LossRecord> train_videonet(VideoNet& net, const TrainSet& data, const TrainConfig& cfg);

/*** Upstream nets are frozen: their penultimate feature maps are evaluated
 * once per line on a scratch tape and re-enter the combiner tape as constant
 * leaves, so upstream weights are untouched (bit-identical afterwards). */
std::vector<LossRecord> train_combiner(Combiner& comb, HsiNet& hsi, VideoNet& video,
                                       const TrainSet& data, const TrainConfig& cfg);

std::vector<LossRecord> train_dncnn(DnCnn& net, const TrainSet& data, const TrainConfig& cfg,
                                    int patch = 32);

}  // namespace msct
