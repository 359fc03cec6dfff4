// msct command-line front end.  All real work lives in the pipeline module;
// this file only parses arguments, loads the config, and maps exceptions to
// the documented exit codes (0 ok, 2 config, 3 data, 4 numeric, 1 other).

#include "CLI11.hpp"

#include "msct/common.hpp"
#include "msct/config.hpp"
#include "msct/pipeline.hpp"

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

namespace {

// "12" -> [12,12], "3:17" -> [3,17].  Validation against the stack happens
// downstream; here we only reject syntax errors.
void parse_band_range(const std::string& s, int& lo, int& hi) {
    auto colon = s.find(':');
    try {
        std::size_t used = 0;
        if (colon == std::string::npos) {
            lo = std::stoi(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            hi = lo;
        } else {
            std::string a = s.substr(0, colon), b = s.substr(colon + 1);
            lo = std::stoi(a, &used);
            if (used != a.size()) throw std::invalid_argument(a);
            hi = std::stoi(b, &used);
            if (used != b.size()) throw std::invalid_argument(b);
        }
    } catch (const std::exception&) {
        throw msct::ConfigError("bad --band value \"" + s + "\"; expected LO or LO:HI");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multispectral CT simulation, denoising, and reconstruction"};
    app.set_version_flag("--version", std::string(msct::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    int threads = 0;
    app.add_option("-c,--config", config_path, "pipeline config (JSON)")->required();
    app.add_option("-j,--threads", threads, "worker thread cap (overrides config)");

    auto* sim = app.add_subcommand("simulate", "generate GT + noisy projection stacks");

    std::string model;
    auto* train = app.add_subcommand("train", "train one model on the simulated dataset");
    train->add_option("--model", model, "hsinet | videonet | combiner | dncnn")->required();

    std::string method;
    auto* den = app.add_subcommand("denoise", "denoise the test stacks");
    den->add_option("--method", method, "nlm | tv | hsinet | videonet | combined | dncnn "
                                        "(default: config denoise.method)");

    std::string band = "0";
    std::string input;
    auto* rec = app.add_subcommand("reconstruct", "FBP-reconstruct selected bands");
    rec->add_option("--band", band, "band index or LO:HI range (default 0)");
    rec->add_option("--input", input, "stack file (default: noisy test slice)");

    int n_avg = 16;
    std::string ref_band = "0";
    auto* avg = app.add_subcommand("average-reference", "reconstruct an N-times averaged reference");
    avg->add_option("--n", n_avg, "number of noise realizations to average (default 16)");
    avg->add_option("--band", ref_band, "band index or LO:HI range (default 0)");

    std::vector<std::string> candidates;
    auto* ev = app.add_subcommand("evaluate", "score candidates against GT");
    ev->add_option("--candidate", candidates,
                   "gt | noisy | <denoise method>; repeatable")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        msct::PipelineConfig cfg = msct::load_pipeline_config(config_path);
        if (threads > 0) {
            cfg.threads = threads;
            cfg.train.threads = threads;
        }

        if (sim->parsed()) {
            msct::cmd_simulate(cfg);
        } else if (train->parsed()) {
            msct::cmd_train(cfg, model);
        } else if (den->parsed()) {
            msct::cmd_denoise(cfg, method);
        } else if (rec->parsed()) {
            int lo = 0, hi = 0;
            parse_band_range(band, lo, hi);
            msct::cmd_reconstruct(cfg, lo, hi, input);
        } else if (avg->parsed()) {
            int lo = 0, hi = 0;
            parse_band_range(ref_band, lo, hi);
            msct::cmd_average_reference(cfg, n_avg, lo, hi);
        } else if (ev->parsed()) {
            msct::cmd_evaluate(cfg, candidates);
        }
        return 0;
    } catch (const msct::ConfigError& e) {
        std::fprintf(stderr, "msct: config error: %s\n", e.what());
        return 2;
    } catch (const msct::DataError& e) {
        std::fprintf(stderr, "msct: data error: %s\n", e.what());
        return 3;
    } catch (const msct::NumericError& e) {
        std::fprintf(stderr, "msct: numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "msct: %s\n", e.what());
        return 1;
    }
}
