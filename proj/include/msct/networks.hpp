#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msct/denoise_classical.hpp"
#include "msct/layers.hpp"
#include "msct/patchcraft.hpp"

namespace msct {

/*** k band indices centred on `target` (start = target - (k-1)/2), clamped to
 * [0, n_rows) so edge windows replicate boundary bands inward. The target
 * always sits at window position (k-1)/2. */
std::vector<int> window_rows(int n_rows, int target, int k);
int window_target_index(int k);

/*** Window tensor [k, width] for one (band, angle) line of a stack. */
Tensor hsi_window(const NormalizedStack& s, int row, int angle, int k);

struct HsiNetConfig {
    int k_bands = 64;
    int spatial_channels = 8;   // per spatial kernel path (3, 5, 7)
    int spectral_channels = 8;  // per spectral kernel path
    int trunk_channels = 32;
    int n_blocks = 6;
    double alpha = 0.1;
    int cbam_reduction = 8;
    void validate() const;
};

/*** Spectral-spatial line denoiser: parallel spatial (k 3/5/7) and spectral
 * (k_bands x 1 then 1 x 3/5/7) extractors, CBAM, octave denoise blocks, a
 * second CBAM, and a zero-initialized final convolution predicting a noise
 * map that is subtracted from the target line. */
class HsiNet {
public:
    HsiNet(HsiNetConfig cfg, std::uint64_t seed);

    struct Out {
        int line;         // [width]
        int penultimate;  // [trunk_channels, width]
    };
    /*** `window` is a tape node of shape [k_bands, width]; `target_idx` its
     * target row (window_target_index(k_bands) for stack windows). */
    Out forward(Tape& t, Binder& bi, int window, int target_idx);

    std::vector<Param*> params();
    std::string arch_spec() const;
    const HsiNetConfig& config() const { return cfg_; }
    int penultimate_channels() const { return cfg_.trunk_channels; }
    const Conv1d& final_conv() const { return final_; }
    Conv1d& final_conv() { return final_; }

private:
    HsiNetConfig cfg_;
    int ch_high_ = 0, ch_low_ = 0;
    Conv1d spat3_, spat5_, spat7_;
    Conv1d spec_band3_, spec_band5_, spec_band7_;  // [c, 1, k_bands] valid over the band axis
    Conv1d spec_w3_, spec_w5_, spec_w7_;
    Cbam cbam_in_;
    Conv1d trunk_;
    OctaveSplit split_;
    std::vector<OctaveBlock> blocks_;
    OctaveMerge merge_;
    Cbam cbam_out_;
    Conv1d final_;  // zero-init: the net starts as the identity
};

struct VideoNetConfig {
    PatchCraftConfig patchcraft;
    int sep_channels = 8;
    int n_sepconv = 3;        // SepConv+BN+ReLU stages before the zero-init final
    int conv2d_channels = 4;  // angular head
    int conv1d_channels = 12;
    int n_conv1d = 17;        // total 1-D convolutions incl. the zero-init final
    void validate() const;
    int n_offsets() const { return static_cast<int>(patchcraft.offsets.size()); }
    int angular_rows() const { return 2 * patchcraft.angle_window + 1; }
};

/*** Everything one VideoNet forward needs for a single (band, angle) line. */
struct VideoSample {
    Tensor input;    // [3, n_offsets, n_neighbors, width]: frames, target, distance
    Tensor target;   // [1, width]
    Tensor angular;  // [angular_rows, width], clamped rows of the band image
};
VideoSample make_video_sample(const std::vector<double>& band, int width, int n_angles,
                              int target_angle, const PatchCraftConfig& cfg);

/*** Angular single-band denoiser: separable 3-D convolutions over patch-craft
 * frames with a residual subtraction, then an angular tail (2-D convolutions
 * over the stacked line set, a chain of 1-D convolutions) with a second
 * residual subtraction. Both finals are zero-initialized. */
class VideoNet {
public:
    VideoNet(VideoNetConfig cfg, std::uint64_t seed);

    struct Out {
        int line;         // [width]
        int penultimate;  // [conv1d_channels, width]
    };
    Out forward(Tape& t, Binder& bi, int input, int target, int angular);

    std::vector<Param*> params();
    std::string arch_spec() const;
    const VideoNetConfig& config() const { return cfg_; }
    int penultimate_channels() const { return cfg_.conv1d_channels; }

private:
    VideoNetConfig cfg_;
    std::vector<SepConv> sep_;
    std::vector<BatchNorm> sep_bn_;
    SepConv sep_final_;  // zero-init
    std::vector<Conv2dLayer> ang2d_;
    std::vector<Conv1d> ang1d_;  // last entry zero-init
};

/*** Stacked ensemble: concatenate the two penultimate feature maps, one 1-D
 * convolution predicts the combined noise map. Warm-started from HsiNet's
 * final layer so training begins at HsiNet's output. */
class Combiner {
public:
    Combiner(int hsi_channels, int video_channels, std::uint64_t seed, int kernel = 3);

    int forward(Tape& t, Binder& bi, int hsi_pen, int video_pen, int target);  // -> [width]
    void warm_start_from(const HsiNet& h);

    std::vector<Param*> params();
    std::string arch_spec() const;

private:
    int hsi_ch_, video_ch_;
    Conv1d conv_;
};

struct DnCnnConfig {
    int channels = 16;
    int n_hidden = 18;  // conv+BN+ReLU blocks between the first and final conv
    void validate() const;
};

/*** Single-frame 2-D baseline: conv+ReLU, n_hidden conv+BN+ReLU blocks, a
 * zero-initialized final conv; residual subtraction. */
class DnCnn {
public:
    DnCnn(DnCnnConfig cfg, std::uint64_t seed);

    int forward(Tape& t, Binder& bi, int patch);  // [1, H, W] -> [1, H, W]

    std::vector<Param*> params();
    std::string arch_spec() const;
    const DnCnnConfig& config() const { return cfg_; }

private:
    DnCnnConfig cfg_;
    Conv2dLayer first_;
    std::vector<Conv2dLayer> hidden_;
    std::vector<BatchNorm> bn_;
    Conv2dLayer final_;  // zero-init
};

}  // namespace msct
