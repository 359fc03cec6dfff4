#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "msct/config.hpp"
#include "msct/common.hpp"
#include "msct/optics.hpp"

#include <filesystem>
#include <fstream>

using namespace msct;

TEST_CASE("empty document yields the desk defaults") {
    PipelineConfig c = parse_pipeline_config("{}", "");
    CHECK(c.seed == 1234);
    CHECK(c.dataset.width == 256);
    CHECK(c.dataset.rows == 64);
    CHECK(c.dataset.angles == 90);
    CHECK(c.train.lr_hsinet == doctest::Approx(2.33e-5));
    CHECK(c.train.lr_combiner == doctest::Approx(2.33e-6));
    CHECK(c.train.k_adjacent_bands == 64);
    CHECK(c.train.n_nearest_neighbors == 5);
    CHECK(c.train.patience == 3);
    CHECK(c.denoise.method == "combined");
    CHECK(c.grid.n_bins == 7540);
    CHECK(c.config_hash == fnv1a64(std::string("{}")));
}

TEST_CASE("unknown keys are rejected with the offending name") {
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"sede": 1})", ""),
                         doctest::Contains("sede"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"train": {"lr_hsi": 1e-4}})", ""),
                         doctest::Contains("lr_hsi"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"networks": {"hsinet": {"chans": 4}}})", ""),
                         doctest::Contains("chans"), ConfigError);
}

TEST_CASE("type errors name the path") {
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"seed": "abc"})", ""),
                         doctest::Contains("seed"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"train": {"batch_size": 3.5}})", ""),
                         doctest::Contains("expected an integer"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"dataset": {"slices": [1, 2.5]}})", ""),
                         doctest::Contains("integer elements"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"metrics": {"psnr": 1}})", ""),
                         doctest::Contains("expected a boolean"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config("[1, 2]", ""),
                         doctest::Contains("expected an object"), ConfigError);
    CHECK_THROWS_AS(parse_pipeline_config("{not json", ""), ConfigError);
}

TEST_CASE("lr_combiner tracks lr_hsinet/10 unless given explicitly") {
    PipelineConfig a = parse_pipeline_config(R"({"train": {"lr_hsinet": 1e-3}})", "");
    CHECK(a.train.lr_combiner == doctest::Approx(1e-4));
    PipelineConfig b =
        parse_pipeline_config(R"({"train": {"lr_hsinet": 1e-3, "lr_combiner": 5e-7}})", "");
    CHECK(b.train.lr_combiner == doctest::Approx(5e-7));
    // untouched when neither is given
    PipelineConfig c = parse_pipeline_config(R"({"train": {"lr_videonet": 0.1}})", "");
    CHECK(c.train.lr_combiner == doctest::Approx(2.33e-6));
}

TEST_CASE("train seed derives from the global seed unless explicit") {
    PipelineConfig a = parse_pipeline_config(R"({"seed": 77})", "");
    CHECK(a.train.seed == hash_combine(77, fnv1a64("train")));
    PipelineConfig b = parse_pipeline_config(R"({"seed": 77, "train": {"seed": 5}})", "");
    CHECK(b.train.seed == 5);
    PipelineConfig c = parse_pipeline_config(R"({"seed": 78})", "");
    CHECK(c.train.seed != a.train.seed);
}

TEST_CASE("train threads inherit the top-level cap") {
    PipelineConfig a = parse_pipeline_config(R"({"threads": 3})", "");
    CHECK(a.threads == 3);
    CHECK(a.train.threads == 3);
}

TEST_CASE("validate rejects slice leakage across splits") {
    const char* overlap = R"({"dataset": {
        "slices": [2,3,4,5], "train_slices": [0,1], "val_slices": [1], "test_slices": [3]}})";
    CHECK_THROWS_WITH_AS(parse_pipeline_config(overlap, ""),
                         doctest::Contains("no slice leakage"), ConfigError);
    const char* oob = R"({"dataset": {
        "slices": [2,3], "train_slices": [0], "val_slices": [1], "test_slices": [7]}})";
    CHECK_THROWS_WITH_AS(parse_pipeline_config(oob, ""),
                         doctest::Contains("test_slices"), ConfigError);
}

TEST_CASE("validate guards parameter ranges") {
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"denoise": {"method": "wiener"}})", ""),
                         doctest::Contains("wiener"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"metrics": {"row_range": [1]}})", ""),
                         doctest::Contains("row_range"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"metrics": {"row_range": [10, 200]}})", ""),
                         doctest::Contains("row_range"), ConfigError);
    CHECK_THROWS_WITH_AS(
        parse_pipeline_config(R"({"train": {"k_adjacent_bands": 64}, "dataset": {"rows": 32}})", ""),
        doctest::Contains("k_adjacent_bands"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"geometry": {"preset": "nope"}})", ""),
                         doctest::Contains("nope"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"networks": {"videonet": {"patch_len": 4}}})", ""),
                         doctest::Contains("patch_len"), ConfigError);
    CHECK_THROWS_WITH_AS(parse_pipeline_config(R"({"phantom": {"kind": "import"}})", ""),
                         doctest::Contains("import"), ConfigError);
}

TEST_CASE("paths resolve relative to the config directory") {
    PipelineConfig c = parse_pipeline_config("{}", "/etc/msct");
    CHECK(resolve_path(c, "data/si.txt") == "/etc/msct/data/si.txt");
    CHECK(resolve_path(c, "/abs/si.txt") == "/abs/si.txt");
    CHECK(resolve_path(c, "") == "");
    PipelineConfig d = parse_pipeline_config("{}", "");
    CHECK(resolve_path(d, "data/si.txt") == "data/si.txt");
}

TEST_CASE("load_pipeline_config reads a file and records its directory") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "msct_cfg_test";
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "a.json");
        os << R"({"seed": 9})";
    }
    PipelineConfig c = load_pipeline_config((dir / "a.json").string());
    CHECK(c.seed == 9);
    CHECK(c.config_dir == dir.string());
    CHECK_THROWS_WITH_AS(load_pipeline_config((dir / "missing.json").string()),
                         doctest::Contains("cannot open"), ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("derived module configs share the single source of truth") {
    const char* text = R"({
        "dataset": {"rows": 48, "width": 64, "angles": 30,
                    "slices": [2,3,4,5], "train_slices": [0,1], "val_slices": [2], "test_slices": [3]},
        "train": {"k_adjacent_bands": 16, "n_denoise_blocks": 3, "n_octave_blocks": 3,
                  "alpha_octave": 0.25, "n_nearest_neighbors": 4},
        "networks": {"hsinet": {"trunk_channels": 12},
                     "videonet": {"patch_len": 9, "offsets": [0, 4]}}
    })";
    PipelineConfig c = parse_pipeline_config(text, "");

    HsiNetConfig h = c.make_hsinet();
    CHECK(h.k_bands == 16);
    CHECK(h.n_blocks == 3);
    CHECK(h.alpha == doctest::Approx(0.25));
    CHECK(h.trunk_channels == 12);

    VideoNetConfig v = c.make_videonet();
    CHECK(v.patchcraft.n_neighbors == 4);
    CHECK(v.patchcraft.patch_len == 9);
    CHECK(v.patchcraft.offsets == std::vector<int>{0, 4});

    DnCnnConfig d = c.make_dncnn();
    CHECK(d.channels == 16);
    CHECK(d.n_hidden == 18);

    PrismGeometry g = c.make_geometry();
    CHECK(g.n_rows == 48);
    // delta calibration honors the anchor
    CHECK(energy_to_row(32.565, g) == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("geometry overrides replace only the named preset fields") {
    PipelineConfig c = parse_pipeline_config(R"({"geometry": {"d": 14.0, "n_pa": 25}})", "");
    PrismGeometry g = c.make_geometry();
    PrismGeometry p = preset_geometry("bm18-sim");
    CHECK(g.d == doctest::Approx(14.0));
    CHECK(g.n_pa == 25);
    CHECK(g.h_pixel == doctest::Approx(p.h_pixel));
    CHECK(g.y == doctest::Approx(p.y));
}

TEST_CASE("metric_rows expands the configured range") {
    PipelineConfig a = parse_pipeline_config(R"({"metrics": {"row_range": [2, 5]}})", "");
    CHECK(a.metric_rows() == std::vector<int>{2, 3, 4, 5});
    PipelineConfig b = parse_pipeline_config("{}", "");
    CHECK(b.metric_rows().empty());
}
