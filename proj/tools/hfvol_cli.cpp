#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hfvol/errors.hpp"
#include "hfvol/harness.hpp"

namespace {

hfvol::HarnessConfig load(const std::string& path) {
    if (path.empty()) return hfvol::parse_config(nlohmann::json::object());
    return hfvol::load_config(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Noise- and jump-robust estimation of integrated volatility functionals"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t reps = 0;
    int threads = -1;
    std::string kernel = "";
    int panels = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--out", out_dir, "output directory (overrides outputs.directory)");
        sub->add_option("--seed", seed, "seed (overrides scenario.seed and mc.seed)");
    };

    CLI::App* moments = app.add_subcommand("moments", "print kernel constants");
    moments->add_option("--config", config_path, "JSON configuration file");
    moments->add_option("--kernel", kernel, "kernel name (overrides kernel.name)");
    moments->add_option("--panels", panels, "quadrature panels");

    CLI::App* simulate = app.add_subcommand("simulate", "simulate one path and write CSV files");
    add_common(simulate);
    CLI::App* estimate = app.add_subcommand("estimate", "estimate functionals on data or one simulated path");
    add_common(estimate);
    CLI::App* montecarlo = app.add_subcommand("montecarlo", "Monte Carlo study of the estimators");
    add_common(montecarlo);
    montecarlo->add_option("--reps", reps, "replications (overrides mc.replications)");
    montecarlo->add_option("--threads", threads, "worker threads (overrides mc.threads and HFVOL_THREADS)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        hfvol::HarnessConfig cfg;
        if (moments->parsed()) {
            std::string name = "triangular";
            int p = 1024;
            if (!config_path.empty()) {
                cfg = load(config_path);
                name = cfg.kernel;
                p = cfg.panels;
            }
            if (!kernel.empty()) name = kernel;
            if (panels > 0) p = panels;
            return hfvol::cmd_moments(name, p, std::cout);
        }

        // Flag overrides are applied to the document so they pass the same validation.
        nlohmann::json doc = nlohmann::json::object();
        if (!config_path.empty()) doc = hfvol::config_to_json(load(config_path));
        if (!out_dir.empty()) doc["outputs"]["directory"] = out_dir;
        if (seed != 0 || (simulate->count("--seed") + estimate->count("--seed") + montecarlo->count("--seed")) > 0) {
            if (doc.contains("scenario")) {
                doc["scenario"]["seed"] = seed;
            } else if (!doc.contains("data")) {
                doc["scenario"] = {{"seed", seed}};
            }
            doc["mc"]["seed"] = seed;
        }
        if (montecarlo->count("--reps") > 0) doc["mc"]["replications"] = reps;
        if (montecarlo->count("--threads") > 0) {
            if (threads < 0) throw hfvol::ConfigError("--threads: must be >= 0");
            doc["mc"]["threads"] = threads;
        }
        cfg = hfvol::parse_config(doc);

        if (simulate->parsed()) return hfvol::cmd_simulate(cfg, std::cerr);
        if (estimate->parsed()) return hfvol::cmd_estimate(cfg, std::cerr);
        int workers = hfvol::resolve_threads(cfg);
        if (montecarlo->count("--threads") > 0 && threads > 0) workers = threads;
        return hfvol::cmd_montecarlo(cfg, workers, std::cerr);
    } catch (const hfvol::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const hfvol::ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
