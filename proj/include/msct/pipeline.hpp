#pragma once

#include <string>
#include <vector>

#include "msct/config.hpp"
#include "msct/recon.hpp"

namespace msct {

inline constexpr const char* kToolVersion = "msct 1.0.0";

/*** Assets loaded once per command from the config. */
struct PipelineContext {
    PipelineConfig cfg;
    EnergySpectrum source;
    MaterialTable si, luag, body, insert;
    VoxelPhantom phantom;
    PrismGeometry geom;
    std::vector<std::pair<std::string, std::uint64_t>> input_hashes;  // resolved path, fnv64
};

PipelineContext load_context(const PipelineConfig& cfg);

/*** Artifact paths inside cfg.output_dir. `k` indexes cfg.dataset.slices. */
std::string artifact_path(const PipelineConfig& cfg, const std::string& name);
std::string gt_stack_name(int k);
std::string noisy_stack_name(int k);
std::string denoised_stack_name(const std::string& method, int k);
std::string weights_name(const std::string& model);
std::string loss_name(const std::string& model);

std::uint64_t file_fnv(const std::string& path);

/*** Derived seed for noisy realization i of the averaging protocol; i = 0 is
 * the dataset's own realization. */
std::uint64_t realization_seed(const PipelineConfig& cfg, int i);

/*** Simulate GT + noisy for the given phantom z slices under `seed`. */
std::vector<SlicePair> simulate_slices(const PipelineContext& ctx, const std::vector<int>& z_slices,
                                       std::uint64_t seed);

/*** Line-parallel neural inference over a normalized stack. `method` is one
 * of hsinet / videonet / combined; null networks that the method does not
 * need are ignored. */
NormalizedStack neural_denoise_stack(const NormalizedStack& noisy, HsiNet* hsi, VideoNet* video,
                                     Combiner* comb, const std::string& method, int threads);
NormalizedStack dncnn_denoise_stack(const NormalizedStack& noisy, DnCnn& net, int threads);

// commands; they throw ConfigError/DataError/NumericError, main maps to codes
void cmd_simulate(const PipelineConfig& cfg);
void cmd_train(const PipelineConfig& cfg, const std::string& model);
void cmd_denoise(const PipelineConfig& cfg, const std::string& method);
void cmd_reconstruct(const PipelineConfig& cfg, int band_lo, int band_hi, const std::string& input);
void cmd_average_reference(const PipelineConfig& cfg, int n, int band_lo, int band_hi);
void cmd_evaluate(const PipelineConfig& cfg, const std::vector<std::string>& candidates);

}  // namespace msct
