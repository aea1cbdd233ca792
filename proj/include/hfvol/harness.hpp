#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfvol/functional.hpp"
#include "hfvol/inference.hpp"
#include "hfvol/preaveraging.hpp"
#include "hfvol/simulation.hpp"

namespace hfvol {

inline constexpr int kSchemaVersion = 1;

struct FunctionalConfig {
    FunctionalSpec spec;
    std::optional<TuningInputs> tuning;  // per-functional override of the shared tuning
};

struct MonteCarloConfig {
    std::size_t replications = 100;
    int threads = 0;  // 0: hardware concurrency
    std::uint64_t seed = 1;
};

struct OutputsConfig {
    std::filesystem::path directory = "hfvol_out";
    bool json = true;
    bool csv = true;
};

struct DataSource {
    std::filesystem::path path;
    double delta_n = 0.0;
    int d = 1;
};

struct HarnessConfig {
    int schema_version = kSchemaVersion;
    ScenarioConfig scenario = heston_jumps_scenario();
    std::optional<DataSource> data;
    TuningInputs tuning;
    EstimateOptions estimator;
    std::string kernel = "triangular";
    int panels = 1024;
    std::vector<FunctionalConfig> functionals;
    MonteCarloConfig mc;
    OutputsConfig outputs;

    int dimension() const { return scenario.d; }
    double delta_n() const { return data ? data->delta_n : scenario.delta_n; }
};

/// Parses and fully validates a config document (tuning windows, kernel,
/// functional names against the data dimension). Unknown keys are errors.
/// Throws ConfigError.
HarnessConfig parse_config(const nlohmann::json& doc);
HarnessConfig load_config(const std::filesystem::path& path);

/// Fully explicit document: parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const HarnessConfig& cfg);

/// Tuning inputs for functional i (override or shared).
const TuningInputs& tuning_for(const HarnessConfig& cfg, std::size_t i);

nlohmann::json report_to_json(const EstimateReport& rep);
/// CSV header and one row per output component (newline-terminated).
std::string report_csv_header();
std::string report_to_csv(const EstimateReport& rep);

struct ComponentSummary {
    std::string functional;
    int component = 0;
    std::size_t replications = 0;  // successful replications
    std::size_t failures = 0;
    double mean_truth = 0.0;
    double mean_bias = 0.0;
    double mean_raw_bias = 0.0;
    double rmse = 0.0;
    double raw_rmse = 0.0;
    double coverage = 0.0;
    double mean_width = 0.0;
    double tail_fraction = 0.0;  // share of |z| > 1.96
    double z_mean = 0.0;
    double z_var = 0.0;
};

struct ReplicationRecord {
    std::size_t replication = 0;
    std::size_t functional = 0;
    int component = 0;
    bool ok = false;
    std::string error;
    double s_hat = 0.0;
    double s_hat_raw = 0.0;
    double truth = 0.0;
    double std_error = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t blocks = 0;
    double truncated_fraction = 0.0;
    std::size_t psd_projected = 0;
    std::size_t guard_violations = 0;
    double z() const { return std_error > 0.0 ? (s_hat - truth) / std_error : 0.0; }
    bool covered() const { return ci_lo <= truth && truth <= ci_hi; }
};

struct MCSummary {
    std::vector<ComponentSummary> components;
    std::vector<ReplicationRecord> records;  // ordered by (replication, functional, component)
    double seconds = 0.0;
    int threads = 1;
};

/// Thread count from config, overridden by HFVOL_THREADS.
int resolve_threads(const HarnessConfig& cfg);

/// One replication: simulate with (mc.seed, rep), estimate every functional.
std::vector<ReplicationRecord> run_replication(const HarnessConfig& cfg, std::size_t rep);

/// Replication-parallel Monte Carlo; results do not depend on the thread count.
MCSummary run_montecarlo(const HarnessConfig& cfg, int threads);

nlohmann::json summary_to_json(const MCSummary& s);

/// Command implementations used by the CLI. Each writes into
/// cfg.outputs.directory and returns the process exit code.
int cmd_moments(const std::string& kernel, int panels, std::ostream& out);
int cmd_simulate(const HarnessConfig& cfg, std::ostream& log);
int cmd_estimate(const HarnessConfig& cfg, std::ostream& log);
int cmd_montecarlo(const HarnessConfig& cfg, int threads, std::ostream& log);

}  // namespace hfvol
