#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msct/detector.hpp"
#include "msct/materials.hpp"
#include "msct/metrics.hpp"
#include "msct/networks.hpp"
#include "msct/optics.hpp"
#include "msct/train.hpp"

namespace msct {

struct GeometryConfig {
    std::string preset = "bm18-sim";
    double anchor_row = 50.0;
    double anchor_energy_kev = 32.565;
    // preset overrides; NaN means "keep the preset value"
    double alpha_deg = 0.0;
    int n_pa = 0;
    double y = 0.0;
    double d = 0.0;
    double h_pixel = 0.0;
    bool has_alpha = false, has_n_pa = false, has_y = false, has_d = false, has_h_pixel = false;
};

struct PhantomConfig {
    std::string kind = "procedural";  // procedural | empty | import
    std::uint64_t seed = 7;
    int nx = 96, ny = 96, nz = 8;
    double voxel_size = 1e-4;  // m
    std::string import_body, import_insert;
    std::string material1 = "al", material2 = "sio2";
};

struct DatasetConfig {
    int width = 256;
    int rows = 64;
    int angles = 90;
    std::vector<int> slices{2, 3, 4, 5};  // phantom z indices
    std::vector<int> train_slices{0, 1};  // indices into `slices`
    std::vector<int> val_slices{2};
    std::vector<int> test_slices{3};
    double pixel_pitch = 1e-4;  // m
};

struct DenoiseConfig {
    std::string method = "combined";
    int nlm_patch_radius = 2;
    int nlm_search_radius = 5;
    double nlm_h = 0.05;
    double tv_lambda = 12.0;
    int tv_iters = 120;
};

struct NetworkWidths {
    // HsiNet
    int spatial_channels = 8;
    int spectral_channels = 8;
    int trunk_channels = 32;
    int cbam_reduction = 8;
    // VideoNet
    int patch_len = 7;
    int angle_window = 4;
    std::vector<int> offsets{0, 3};
    int sep_channels = 8;
    int n_sepconv = 3;
    int conv2d_channels = 4;
    int conv1d_channels = 12;
    int n_conv1d = 17;
    // DnCnn
    int dncnn_channels = 16;
    int dncnn_hidden = 18;
};

struct MetricsConfig {
    MetricsSelection selection;
    int row_lo = -1;  // -1,-1 → all rows
    int row_hi = -1;
};

struct PipelineConfig {
    std::uint64_t seed = 1234;
    int threads = 0;
    std::string output_dir = "out";
    GeometryConfig geometry;
    EnergyGrid grid{22.9, 0.05, 7540};
    std::string spectrum_path = "data/bm18_spectrum_approx.txt";
    std::string si_path = "data/si.txt";
    std::string luag_path = "data/luag.txt";
    std::string body_path = "data/al.txt";
    std::string insert_path = "data/sio2.txt";
    PhantomConfig phantom;
    DatasetConfig dataset;
    TrainConfig train;
    NetworkWidths networks;
    DenoiseConfig denoise;
    MetricsConfig metrics;

    std::string config_dir;  // directory of the loaded file, for relative paths
    std::uint64_t config_hash = 0;  // fnv of the raw config text, for manifests

    void validate() const;

    /*** Module structs derived from the single source of truth. */
    PrismGeometry make_geometry() const;  // includes delta calibration
    DetectorConfig detector;              // parsed directly
    HsiNetConfig make_hsinet() const;
    VideoNetConfig make_videonet() const;
    DnCnnConfig make_dncnn() const;
    std::vector<int> metric_rows() const;  // empty → all
};

/*** Strict parse: unknown keys anywhere are a ConfigError; types must match;
 * missing keys fall back to the defaults above. */
PipelineConfig load_pipeline_config(const std::string& path);
PipelineConfig parse_pipeline_config(const std::string& json_text, const std::string& config_dir);

/*** config_dir-relative resolution for input files ("" stays ""). */
std::string resolve_path(const PipelineConfig& cfg, const std::string& path);

}  // namespace msct
