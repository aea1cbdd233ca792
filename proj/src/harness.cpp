#include "hfvol/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <initializer_list>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "hfvol/errors.hpp"
#include "hfvol/kernel_moments.hpp"

namespace hfvol {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

double as_double(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(where + ": must be finite");
    return x;
}

long long as_int(const json& v, const std::string& where) {
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return static_cast<long long>(x);
    }
    throw ConfigError(where + ": expected an integer");
}

std::size_t as_count(const json& v, const std::string& where) {
    const long long x = as_int(v, where);
    if (x < 0) throw ConfigError(where + ": must be >= 0");
    return static_cast<std::size_t>(x);
}

std::uint64_t as_u64(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const long long x = as_int(v, where);
    if (x < 0) throw ConfigError(where + ": must be >= 0");
    return static_cast<std::uint64_t>(x);
}

bool as_bool(const json& v, const std::string& where) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

std::vector<double> as_doubles(const json& v, const std::string& where) {
    if (v.is_number()) return {as_double(v, where)};
    if (!v.is_array()) throw ConfigError(where + ": expected a number or an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_double(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

Eigen::MatrixXd as_matrix(const json& v, int d, const std::string& where) {
    if (v.is_number()) {
        // scalar: c times identity
        return as_double(v, where) * Eigen::MatrixXd::Identity(d, d);
    }
    if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a number or a square array");
    const auto rows = static_cast<int>(v.size());
    Eigen::MatrixXd m(rows, rows);
    for (int i = 0; i < rows; ++i) {
        const std::string wi = where + "[" + std::to_string(i) + "]";
        const auto row = as_doubles(v[static_cast<std::size_t>(i)], wi);
        if (static_cast<int>(row.size()) != rows) throw ConfigError(wi + ": matrix must be square");
        for (int j = 0; j < rows; ++j) m(i, j) = row[static_cast<std::size_t>(j)];
    }
    return m;
}

void apply_tuning(const json& j, TuningInputs& in, const std::string& where) {
    check_keys(j,
               {"theta", "varrho", "alpha", "alpha_pilot", "kappa", "rho", "nu", "theta_prime", "floor_mode",
                "truncation", "per_component_alphas"},
               where);
    if (j.contains("theta")) in.theta = as_double(j["theta"], where + ".theta");
    if (j.contains("varrho")) in.varrho = as_double(j["varrho"], where + ".varrho");
    if (j.contains("alpha")) {
        if (j["alpha"].is_null()) {
            in.alpha.reset();
        } else {
            in.alpha = as_double(j["alpha"], where + ".alpha");
        }
    }
    if (j.contains("alpha_pilot")) {
        const json& p = j["alpha_pilot"];
        check_keys(p, {"factor", "exponent"}, where + ".alpha_pilot");
        if (p.contains("factor")) in.alpha_pilot.factor = as_double(p["factor"], where + ".alpha_pilot.factor");
        if (p.contains("exponent")) in.alpha_pilot.exponent = as_double(p["exponent"], where + ".alpha_pilot.exponent");
    }
    if (j.contains("kappa")) in.kappa = as_double(j["kappa"], where + ".kappa");
    if (j.contains("rho")) in.rho = as_double(j["rho"], where + ".rho");
    if (j.contains("nu")) in.nu = as_double(j["nu"], where + ".nu");
    if (j.contains("theta_prime")) {
        if (j["theta_prime"].is_null()) {
            in.theta_prime.reset();
        } else {
            in.theta_prime = as_double(j["theta_prime"], where + ".theta_prime");
        }
    }
    if (j.contains("floor_mode")) in.floor_mode = as_bool(j["floor_mode"], where + ".floor_mode");
    if (j.contains("truncation")) {
        in.truncation = truncation_mode_from_string(as_string(j["truncation"], where + ".truncation"));
    }
    if (j.contains("per_component_alphas")) {
        in.per_component_alphas = as_doubles(j["per_component_alphas"], where + ".per_component_alphas");
    }
}

json tuning_to_json(const TuningInputs& in) {
    json j;
    j["theta"] = in.theta;
    j["varrho"] = in.varrho;
    j["alpha"] = in.alpha ? json(*in.alpha) : json(nullptr);
    j["alpha_pilot"] = {{"factor", in.alpha_pilot.factor}, {"exponent", in.alpha_pilot.exponent}};
    j["kappa"] = in.kappa;
    j["rho"] = in.rho;
    j["nu"] = in.nu;
    j["theta_prime"] = in.theta_prime ? json(*in.theta_prime) : json(nullptr);
    j["floor_mode"] = in.floor_mode;
    j["truncation"] = std::string(to_string(in.truncation));
    j["per_component_alphas"] = in.per_component_alphas;
    return j;
}

void apply_scenario(const json& j, ScenarioConfig& sc) {
    const std::string where = "scenario";
    check_keys(j,
               {"preset", "kind", "d", "delta_n", "samples", "days", "samples_per_day", "substeps", "x0", "drift", "c0",
                "mean_reversion", "level", "vol_of_vol", "leverage", "constant_c", "regressor_sd", "residual_sd", "beta",
                "price_jump_intensity", "price_jump_mean", "price_jump_sd", "vol_jump_intensity", "vol_jump_log_mean",
                "vol_jump_log_var", "noise_sd", "seed"},
               where);
    if (j.contains("preset")) {
        const std::string p = as_string(j["preset"], where + ".preset");
        if (p == "heston_jumps") {
            sc = heston_jumps_scenario();
        } else if (p == "constant_vol") {
            sc = constant_vol_scenario();
        } else if (p == "regression" || p == "regression_factor") {
            sc = regression_scenario();
        } else {
            throw ConfigError(where + ".preset: unknown preset '" + p + "' (heston_jumps, constant_vol, regression)");
        }
    }
    if (j.contains("kind")) sc.kind = scenario_kind_from_string(as_string(j["kind"], where + ".kind"));
    if (j.contains("d")) {
        const long long d = as_int(j["d"], where + ".d");
        if (d < 1 || d > kMaxDimension) throw ConfigError(where + ".d: must lie in [1, 64]");
        sc.d = static_cast<int>(d);
        if (sc.constant_c.rows() != sc.d && !j.contains("constant_c")) {
            sc.constant_c = sc.constant_c(0, 0) * Eigen::MatrixXd::Identity(sc.d, sc.d);
        }
    }
    if (j.contains("delta_n")) sc.delta_n = as_double(j["delta_n"], where + ".delta_n");
    if (j.contains("samples") && j.contains("days")) throw ConfigError(where + ": give either samples or days");
    if (j.contains("samples")) sc.n = as_count(j["samples"], where + ".samples");
    if (j.contains("days")) {
        double per_day = 23400.0;
        if (j.contains("samples_per_day")) per_day = as_double(j["samples_per_day"], where + ".samples_per_day");
        const double days = as_double(j["days"], where + ".days");
        if (!(days > 0.0) || !(per_day > 0.0)) throw ConfigError(where + ": days and samples_per_day must be > 0");
        sc.n = static_cast<std::size_t>(std::llround(days * per_day));
    } else if (j.contains("samples_per_day")) {
        throw ConfigError(where + ".samples_per_day: only meaningful together with days");
    }
    if (j.contains("substeps")) sc.substeps = static_cast<int>(as_int(j["substeps"], where + ".substeps"));
    auto num = [&](const char* key, double& field) {
        if (j.contains(key)) field = as_double(j[key], where + "." + key);
    };
    num("x0", sc.x0);
    num("drift", sc.drift);
    num("c0", sc.c0);
    num("mean_reversion", sc.mean_reversion);
    num("level", sc.level);
    num("vol_of_vol", sc.vol_of_vol);
    num("leverage", sc.leverage);
    num("residual_sd", sc.residual_sd);
    num("price_jump_intensity", sc.price_jump_intensity);
    num("price_jump_mean", sc.price_jump_mean);
    num("price_jump_sd", sc.price_jump_sd);
    num("vol_jump_intensity", sc.vol_jump_intensity);
    num("vol_jump_log_mean", sc.vol_jump_log_mean);
    num("vol_jump_log_var", sc.vol_jump_log_var);
    if (j.contains("constant_c")) sc.constant_c = as_matrix(j["constant_c"], sc.d, where + ".constant_c");
    if (j.contains("regressor_sd")) sc.regressor_sd = as_doubles(j["regressor_sd"], where + ".regressor_sd");
    if (j.contains("beta")) sc.beta = as_doubles(j["beta"], where + ".beta");
    if (j.contains("noise_sd")) {
        const json& v = j["noise_sd"];
        if (v.is_number()) {
            const double s = as_double(v, where + ".noise_sd");
            sc.noise_sd = s == 0.0 ? std::vector<double>{} : std::vector<double>(static_cast<std::size_t>(sc.d), s);
        } else {
            sc.noise_sd = as_doubles(v, where + ".noise_sd");
        }
    } else if (!sc.noise_sd.empty() && sc.noise_sd.size() != static_cast<std::size_t>(sc.d)) {
        sc.noise_sd.assign(static_cast<std::size_t>(sc.d), sc.noise_sd.front());
    }
    if (j.contains("seed")) sc.seed = as_u64(j["seed"], where + ".seed");
}

json scenario_to_json(const ScenarioConfig& sc) {
    json j;
    j["kind"] = std::string(to_string(sc.kind));
    j["d"] = sc.d;
    j["delta_n"] = sc.delta_n;
    j["samples"] = sc.n;
    j["substeps"] = sc.substeps;
    j["x0"] = sc.x0;
    j["drift"] = sc.drift;
    j["c0"] = sc.c0;
    j["mean_reversion"] = sc.mean_reversion;
    j["level"] = sc.level;
    j["vol_of_vol"] = sc.vol_of_vol;
    j["leverage"] = sc.leverage;
    json cm = json::array();
    for (Eigen::Index r = 0; r < sc.constant_c.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < sc.constant_c.cols(); ++c) row.push_back(sc.constant_c(r, c));
        cm.push_back(row);
    }
    j["constant_c"] = cm;
    j["regressor_sd"] = sc.regressor_sd;
    j["residual_sd"] = sc.residual_sd;
    j["beta"] = sc.beta;
    j["price_jump_intensity"] = sc.price_jump_intensity;
    j["price_jump_mean"] = sc.price_jump_mean;
    j["price_jump_sd"] = sc.price_jump_sd;
    j["vol_jump_intensity"] = sc.vol_jump_intensity;
    j["vol_jump_log_mean"] = sc.vol_jump_log_mean;
    j["vol_jump_log_var"] = sc.vol_jump_log_var;
    j["noise_sd"] = sc.noise_sd;
    j["seed"] = sc.seed;
    return j;
}

FunctionalConfig parse_functional(const json& j, const TuningInputs& base, std::size_t idx) {
    const std::string where = "functionals[" + std::to_string(idx) + "]";
    FunctionalConfig fc;
    if (j.is_string()) {
        fc.spec.name = j.get<std::string>();
        return fc;
    }
    check_keys(j, {"name", "indices", "w", "label", "tuning"}, where);
    if (!j.contains("name")) throw ConfigError(where + ": missing name");
    fc.spec.name = as_string(j["name"], where + ".name");
    if (j.contains("indices")) {
        const json& v = j["indices"];
        if (v.is_number()) {
            fc.spec.indices.push_back(static_cast<int>(as_int(v, where + ".indices")));
        } else {
            if (!v.is_array()) throw ConfigError(where + ".indices: expected an array of integers");
            for (std::size_t i = 0; i < v.size(); ++i) {
                fc.spec.indices.push_back(static_cast<int>(as_int(v[i], where + ".indices")));
            }
        }
    }
    if (j.contains("w")) fc.spec.w = as_double(j["w"], where + ".w");
    if (j.contains("label")) fc.spec.label = as_string(j["label"], where + ".label");
    if (j.contains("tuning")) {
        TuningInputs t = base;
        apply_tuning(j["tuning"], t, where + ".tuning");
        fc.tuning = t;
    }
    return fc;
}

std::string display_name(const FunctionalConfig& fc, const Functional& f) {
    return fc.spec.label.empty() ? f.name : fc.spec.label;
}

void validate_config(const HarnessConfig& cfg) {
    if (!cfg.data) cfg.scenario.validate();
    const Kernel kernel = kernel_by_name(cfg.kernel);
    check_kernel(kernel);
    if (cfg.panels < 1000) throw ConfigError("kernel.panels: need at least 1000 quadrature panels");
    if (!(cfg.estimator.level > 0.0 && cfg.estimator.level < 1.0)) {
        throw ConfigError("estimator.level: must lie in (0, 1)");
    }
    if (cfg.mc.replications < 1) throw ConfigError("mc.replications: must be >= 1");
    if (cfg.mc.threads < 0) throw ConfigError("mc.threads: must be >= 0");
    if (cfg.functionals.empty()) throw ConfigError("functionals: need at least one functional");
    const double delta = cfg.delta_n();
    for (std::size_t i = 0; i < cfg.functionals.size(); ++i) {
        const std::string where = "functionals[" + std::to_string(i) + "]";
        try {
            (void)builtin(cfg.functionals[i].spec, cfg.dimension());
            const TuningParams tp = validate_tuning(delta, tuning_for(cfg, i));
            if (tp.truncation_mode == TruncationMode::per_component && !tp.per_component_alphas.empty() &&
                tp.per_component_alphas.size() != static_cast<std::size_t>(cfg.dimension())) {
                throw ConfigError("per_component_alphas needs one entry per component");
            }
            if (!cfg.data) {
                const std::size_t need = static_cast<std::size_t>(tp.k_n) + static_cast<std::size_t>(tp.l_n);
                if (cfg.scenario.n < need) {
                    throw ConfigError("scenario has " + std::to_string(cfg.scenario.n) + " samples but k_n + l_n = " +
                                      std::to_string(need) + " are needed for one block");
                }
                if (cfg.scenario.n <= 2 * static_cast<std::size_t>(tp.l_n) + 2) {
                    throw ConfigError("scenario too short for the truncation pilot (need n > 2 l_n)");
                }
            }
        } catch (const ConfigError& e) {
            throw ConfigError(where + ": " + e.what());
        }
    }
}

std::ofstream open_output(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw Error("cannot open " + p.string() + " for writing");
    return out;
}

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json matrix_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(row);
    }
    return a;
}

struct PreparedFunctional {
    Functional f;
    std::string name;
    std::size_t group = 0;
};

struct TuningGroup {
    TuningParams tp;
    KernelMoments km;
    std::vector<std::size_t> members;
};

struct Prepared {
    std::vector<PreparedFunctional> functionals;
    std::vector<TuningGroup> groups;
};

// Functionals without a tuning override share one spot series.
Prepared prepare(const HarnessConfig& cfg, int d) {
    Prepared p;
    const Kernel kernel = kernel_by_name(cfg.kernel);
    std::optional<std::size_t> shared;
    for (std::size_t i = 0; i < cfg.functionals.size(); ++i) {
        const FunctionalConfig& fc = cfg.functionals[i];
        PreparedFunctional pf;
        pf.f = builtin(fc.spec, d);
        pf.name = display_name(fc, pf.f);
        if (!fc.tuning && shared) {
            pf.group = *shared;
        } else {
            TuningGroup g;
            g.tp = validate_tuning(cfg.delta_n(), tuning_for(cfg, i));
            g.km = make_kernel_moments(kernel, g.tp.l_n, cfg.panels);
            p.groups.push_back(std::move(g));
            pf.group = p.groups.size() - 1;
            if (!fc.tuning) shared = pf.group;
        }
        p.groups[pf.group].members.push_back(i);
        p.functionals.push_back(std::move(pf));
    }
    return p;
}

struct GroupResult {
    std::vector<std::optional<EstimateReport>> reports;
    std::vector<std::string> errors;
};

// Estimates every functional on one path; per-functional failures are kept
// as messages so one bad functional does not sink the others.
GroupResult estimate_all(const Prepared& p, const ObservationSet& obs, const EstimateOptions& opts) {
    GroupResult out;
    out.reports.resize(p.functionals.size());
    out.errors.resize(p.functionals.size());
    for (const TuningGroup& g : p.groups) {
        try {
            const TuningParams tp = resolve_truncation(g.tp, obs, g.km);
            const SpotSeries spot = spot_series(obs, tp, g.km, opts.spot);
            for (std::size_t i : g.members) {
                try {
                    out.reports[i] = estimate_from_spot(spot, obs.size(), p.functionals[i].f, tp, g.km, opts);
                    out.reports[i]->functional = p.functionals[i].name;
                } catch (const Error& e) {
                    out.errors[i] = e.what();
                }
            }
        } catch (const InsufficientDataError& e) {
            for (std::size_t i : g.members) out.errors[i] = e.what();
        } catch (const NumericalError& e) {
            for (std::size_t i : g.members) out.errors[i] = e.what();
        }
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

const TuningInputs& tuning_for(const HarnessConfig& cfg, std::size_t i) {
    if (i < cfg.functionals.size() && cfg.functionals[i].tuning) return *cfg.functionals[i].tuning;
    return cfg.tuning;
}

HarnessConfig parse_config(const json& doc) {
    HarnessConfig cfg;
    check_keys(doc, {"schema_version", "scenario", "data", "tuning", "estimator", "kernel", "functionals", "mc", "outputs"},
               "config");
    if (doc.contains("schema_version")) {
        const long long v = as_int(doc["schema_version"], "schema_version");
        if (v != kSchemaVersion) {
            throw ConfigError("schema_version: unsupported version " + std::to_string(v) + " (expected " +
                              std::to_string(kSchemaVersion) + ")");
        }
    }
    if (doc.contains("scenario")) apply_scenario(doc["scenario"], cfg.scenario);
    if (doc.contains("data")) {
        const json& j = doc["data"];
        check_keys(j, {"path", "delta_n", "d"}, "data");
        if (!j.contains("path") || !j.contains("delta_n")) throw ConfigError("data: needs path and delta_n");
        DataSource ds;
        ds.path = as_string(j["path"], "data.path");
        ds.delta_n = as_double(j["delta_n"], "data.delta_n");
        if (!(ds.delta_n > 0.0)) throw ConfigError("data.delta_n: must be > 0");
        if (j.contains("d")) {
            const long long d = as_int(j["d"], "data.d");
            if (d < 1 || d > kMaxDimension) throw ConfigError("data.d: must lie in [1, 64]");
            ds.d = static_cast<int>(d);
        }
        cfg.scenario.d = ds.d;
        cfg.data = ds;
    }
    if (doc.contains("tuning")) apply_tuning(doc["tuning"], cfg.tuning, "tuning");
    if (doc.contains("estimator")) {
        const json& j = doc["estimator"];
        check_keys(j, {"noise_correction", "psd_projection", "overlapping", "level"}, "estimator");
        if (j.contains("noise_correction")) cfg.estimator.spot.noise_correction = as_bool(j["noise_correction"], "estimator.noise_correction");
        if (j.contains("psd_projection")) cfg.estimator.spot.psd_projection = as_bool(j["psd_projection"], "estimator.psd_projection");
        if (j.contains("overlapping")) cfg.estimator.spot.overlapping = as_bool(j["overlapping"], "estimator.overlapping");
        if (j.contains("level")) cfg.estimator.level = as_double(j["level"], "estimator.level");
    }
    if (doc.contains("kernel")) {
        const json& j = doc["kernel"];
        if (j.is_string()) {
            cfg.kernel = j.get<std::string>();
        } else {
            check_keys(j, {"name", "panels"}, "kernel");
            if (j.contains("name")) cfg.kernel = as_string(j["name"], "kernel.name");
            if (j.contains("panels")) cfg.panels = static_cast<int>(as_int(j["panels"], "kernel.panels"));
        }
    }
    if (doc.contains("functionals")) {
        const json& j = doc["functionals"];
        if (!j.is_array()) throw ConfigError("functionals: expected an array");
        for (std::size_t i = 0; i < j.size(); ++i) cfg.functionals.push_back(parse_functional(j[i], cfg.tuning, i));
    } else {
        FunctionalConfig fc;
        fc.spec.name = "identity";
        cfg.functionals.push_back(fc);
    }
    if (doc.contains("mc")) {
        const json& j = doc["mc"];
        check_keys(j, {"replications", "threads", "seed"}, "mc");
        if (j.contains("replications")) cfg.mc.replications = as_count(j["replications"], "mc.replications");
        if (j.contains("threads")) cfg.mc.threads = static_cast<int>(as_int(j["threads"], "mc.threads"));
        if (j.contains("seed")) cfg.mc.seed = as_u64(j["seed"], "mc.seed");
    }
    if (doc.contains("outputs")) {
        const json& j = doc["outputs"];
        check_keys(j, {"directory", "formats"}, "outputs");
        if (j.contains("directory")) cfg.outputs.directory = as_string(j["directory"], "outputs.directory");
        if (j.contains("formats")) {
            const json& f = j["formats"];
            if (!f.is_array()) throw ConfigError("outputs.formats: expected an array of strings");
            cfg.outputs.json = false;
            cfg.outputs.csv = false;
            for (const auto& e : f) {
                const std::string s = as_string(e, "outputs.formats");
                if (s == "json") {
                    cfg.outputs.json = true;
                } else if (s == "csv") {
                    cfg.outputs.csv = true;
                } else {
                    throw ConfigError("outputs.formats: unknown format '" + s + "' (json, csv)");
                }
            }
        }
    }
    validate_config(cfg);
    return cfg;
}

HarnessConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

json config_to_json(const HarnessConfig& cfg) {
    json j;
    j["schema_version"] = cfg.schema_version;
    if (cfg.data) {
        j["data"] = {{"path", cfg.data->path.string()}, {"delta_n", cfg.data->delta_n}, {"d", cfg.data->d}};
    } else {
        j["scenario"] = scenario_to_json(cfg.scenario);
    }
    j["tuning"] = tuning_to_json(cfg.tuning);
    j["estimator"] = {{"noise_correction", cfg.estimator.spot.noise_correction},
                      {"psd_projection", cfg.estimator.spot.psd_projection},
                      {"overlapping", cfg.estimator.spot.overlapping},
                      {"level", cfg.estimator.level}};
    j["kernel"] = {{"name", cfg.kernel}, {"panels", cfg.panels}};
    json fs = json::array();
    for (const FunctionalConfig& fc : cfg.functionals) {
        json f = {{"name", fc.spec.name}, {"indices", fc.spec.indices}, {"w", fc.spec.w}, {"label", fc.spec.label}};
        if (fc.tuning) f["tuning"] = tuning_to_json(*fc.tuning);
        fs.push_back(f);
    }
    j["functionals"] = fs;
    j["mc"] = {{"replications", cfg.mc.replications}, {"threads", cfg.mc.threads}, {"seed", cfg.mc.seed}};
    json formats = json::array();
    if (cfg.outputs.json) formats.push_back("json");
    if (cfg.outputs.csv) formats.push_back("csv");
    j["outputs"] = {{"directory", cfg.outputs.directory.string()}, {"formats", formats}};
    return j;
}

json report_to_json(const EstimateReport& rep) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["functional"] = rep.functional;
    j["t"] = rep.t;
    j["delta_n"] = rep.delta_n;
    j["S_hat"] = vector_json(rep.S_hat);
    j["S_hat_raw"] = vector_json(rep.S_hat_raw);
    j["bias_total"] = vector_json(rep.bias_total);
    j["V_hat"] = matrix_json(rep.V_hat);
    j["std_error"] = vector_json(rep.std_error);
    json ci = json::array();
    for (const auto& [lo, hi] : rep.ci) ci.push_back({lo, hi});
    j["ci"] = ci;
    j["level"] = rep.level;
    j["a_n_t"] = rep.a_n_t;
    j["diagnostics"] = {{"blocks", rep.diagnostics.blocks},
                        {"mean_truncated_fraction", rep.diagnostics.mean_truncated_fraction},
                        {"psd_projected", rep.diagnostics.psd_projected},
                        {"guard_violations", rep.diagnostics.guard_violations}};
    const TuningParams& tp = rep.tuning;
    j["tuning"] = {{"l_n", tp.l_n},
                   {"k_n", tp.k_n},
                   {"m_n", tp.m_n},
                   {"nu_n", tp.nu_n},
                   {"alpha", tp.alpha},
                   {"kappa", tp.kappa},
                   {"rho", tp.rho},
                   {"nu", tp.nu},
                   {"theta", tp.theta},
                   {"theta_effective", tp.theta_effective()},
                   {"varrho", tp.varrho},
                   {"theta_prime", tp.theta_prime},
                   {"truncation", std::string(to_string(tp.truncation_mode))},
                   {"per_component_alphas", tp.per_component_alphas}};
    return j;
}

std::string report_csv_header() {
    return "functional,component,t,S_hat,S_hat_raw,bias_total,std_error,ci_lo,ci_hi,level,a_n_t,blocks,"
           "mean_truncated_fraction,psd_projected,guard_violations,l_n,k_n\n";
}

std::string report_to_csv(const EstimateReport& rep) {
    std::ostringstream os;
    for (Eigen::Index a = 0; a < rep.S_hat.size(); ++a) {
        const auto ua = static_cast<std::size_t>(a);
        os << rep.functional << ',' << a << ',' << format_double(rep.t) << ',' << format_double(rep.S_hat[a]) << ','
           << format_double(rep.S_hat_raw[a]) << ',' << format_double(rep.bias_total[a]) << ','
           << format_double(rep.std_error[a]) << ',' << format_double(rep.ci[ua].first) << ','
           << format_double(rep.ci[ua].second) << ',' << format_double(rep.level) << ',' << format_double(rep.a_n_t)
           << ',' << rep.diagnostics.blocks << ',' << format_double(rep.diagnostics.mean_truncated_fraction) << ','
           << rep.diagnostics.psd_projected << ',' << rep.diagnostics.guard_violations << ',' << rep.tuning.l_n << ','
           << rep.tuning.k_n << '\n';
    }
    return os.str();
}

int resolve_threads(const HarnessConfig& cfg) {
    int threads = cfg.mc.threads;
    if (const char* env = std::getenv("HFVOL_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 0) throw ConfigError("HFVOL_THREADS: expected a non-negative integer");
        threads = static_cast<int>(v);
    }
    if (threads == 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return threads;
}

std::vector<ReplicationRecord> run_replication(const HarnessConfig& cfg, std::size_t rep) {
    ScenarioConfig sc = cfg.scenario;
    sc.seed = cfg.mc.seed;
    const PathBundle bundle = simulate(sc, rep);
    const Prepared p = prepare(cfg, sc.d);
    const GroupResult res = estimate_all(p, bundle.observations, cfg.estimator);

    std::vector<ReplicationRecord> out;
    for (std::size_t i = 0; i < p.functionals.size(); ++i) {
        const Functional& f = p.functionals[i].f;
        Eigen::VectorXd truth = Eigen::VectorXd::Zero(f.output_dim);
        std::string error = res.errors[i];
        if (error.empty()) {
            try {
                truth = true_functional(bundle, f);
            } catch (const Error& e) {
                error = std::string("truth: ") + e.what();
            }
        }
        for (int a = 0; a < f.output_dim; ++a) {
            ReplicationRecord rec;
            rec.replication = rep;
            rec.functional = i;
            rec.component = a;
            rec.truth = truth[a];
            if (error.empty() && res.reports[i]) {
                const EstimateReport& r = *res.reports[i];
                rec.ok = true;
                rec.s_hat = r.S_hat[a];
                rec.s_hat_raw = r.S_hat_raw[a];
                rec.std_error = r.std_error[a];
                rec.ci_lo = r.ci[static_cast<std::size_t>(a)].first;
                rec.ci_hi = r.ci[static_cast<std::size_t>(a)].second;
                rec.blocks = r.diagnostics.blocks;
                rec.truncated_fraction = r.diagnostics.mean_truncated_fraction;
                rec.psd_projected = r.diagnostics.psd_projected;
                rec.guard_violations = r.diagnostics.guard_violations;
            } else {
                rec.error = error;
            }
            out.push_back(std::move(rec));
        }
    }
    return out;
}

MCSummary run_montecarlo(const HarnessConfig& cfg, int threads) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t reps = cfg.mc.replications;
    threads = std::max(1, std::min<int>(threads, static_cast<int>(reps)));

    std::vector<std::vector<ReplicationRecord>> results(reps);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t rep = next.fetch_add(1);
            if (rep >= reps) return;
            try {
                results[rep] = run_replication(cfg, rep);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(reps);
                return;
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (int w = 1; w < threads; ++w) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);

    MCSummary s;
    s.threads = threads;
    for (auto& r : results) {
        for (auto& rec : r) s.records.push_back(std::move(rec));
    }

    const Prepared p = prepare(cfg, cfg.dimension());
    for (std::size_t i = 0; i < p.functionals.size(); ++i) {
        for (int a = 0; a < p.functionals[i].f.output_dim; ++a) {
            ComponentSummary cs;
            cs.functional = p.functionals[i].name;
            cs.component = a;
            std::vector<double> bias, raw, truth, width, z;
            std::size_t covered = 0, tails = 0;
            for (const ReplicationRecord& rec : s.records) {
                if (rec.functional != i || rec.component != a) continue;
                if (!rec.ok) {
                    ++cs.failures;
                    continue;
                }
                bias.push_back(rec.s_hat - rec.truth);
                raw.push_back(rec.s_hat_raw - rec.truth);
                truth.push_back(rec.truth);
                width.push_back(rec.ci_hi - rec.ci_lo);
                z.push_back(rec.z());
                if (rec.covered()) ++covered;
                if (std::abs(rec.z()) > 1.96) ++tails;
            }
            cs.replications = bias.size();
            if (cs.replications > 0) {
                const double m = static_cast<double>(cs.replications);
                cs.mean_truth = mean_of(truth);
                cs.mean_bias = mean_of(bias);
                cs.mean_raw_bias = mean_of(raw);
                double se = 0.0, sr = 0.0;
                for (std::size_t k = 0; k < bias.size(); ++k) {
                    se += bias[k] * bias[k];
                    sr += raw[k] * raw[k];
                }
                cs.rmse = std::sqrt(se / m);
                cs.raw_rmse = std::sqrt(sr / m);
                cs.coverage = static_cast<double>(covered) / m;
                cs.tail_fraction = static_cast<double>(tails) / m;
                cs.mean_width = mean_of(width);
                cs.z_mean = mean_of(z);
                double sv = 0.0;
                for (double x : z) sv += (x - cs.z_mean) * (x - cs.z_mean);
                cs.z_var = cs.replications > 1 ? sv / (m - 1.0) : 0.0;
            }
            s.components.push_back(cs);
        }
    }
    s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return s;
}

json summary_to_json(const MCSummary& s) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["threads"] = s.threads;
    j["seconds"] = s.seconds;
    json comps = json::array();
    for (const ComponentSummary& c : s.components) {
        comps.push_back({{"functional", c.functional},
                         {"component", c.component},
                         {"replications", c.replications},
                         {"failures", c.failures},
                         {"mean_truth", c.mean_truth},
                         {"mean_bias", c.mean_bias},
                         {"mean_raw_bias", c.mean_raw_bias},
                         {"rmse", c.rmse},
                         {"raw_rmse", c.raw_rmse},
                         {"coverage", c.coverage},
                         {"mean_width", c.mean_width},
                         {"tail_fraction", c.tail_fraction},
                         {"z_mean", c.z_mean},
                         {"z_var", c.z_var}});
    }
    j["functionals"] = comps;
    return j;
}

int cmd_moments(const std::string& kernel_name, int panels, std::ostream& out) {
    const Kernel kernel = kernel_by_name(kernel_name);
    check_kernel(kernel);
    if (panels < 1000) throw ConfigError("kernel.panels: need at least 1000 quadrature panels");
    const ContinuousMoments q = continuous_moments(kernel, panels);
    auto to_json = [](const ContinuousMoments& m) {
        return json{{"phi0_at_0", m.phi0_at_0}, {"phi1_at_0", m.phi1_at_0}, {"Phi_00", m.Phi_00},
                    {"Phi_01", m.Phi_01},       {"Phi_11", m.Phi_11},       {"Psi_00", m.Psi_00},
                    {"Psi_01", m.Psi_01},       {"Psi_11", m.Psi_11}};
    };
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kernel"] = kernel_name;
    j["description"] = kernel.description;
    j["panels"] = panels;
    j["quadrature"] = to_json(q);
    if (kernel.closed_form) j["closed_form"] = to_json(*kernel.closed_form);
    out << j.dump(2) << '\n';
    return 0;
}

int cmd_simulate(const HarnessConfig& cfg, std::ostream& log) {
    if (cfg.data) throw ConfigError("simulate: config has a data source instead of a scenario");
    const PathBundle bundle = simulate(cfg.scenario, 0);
    const auto& dir = cfg.outputs.directory;
    ensure_directory(dir);
    save_csv(bundle.observations, dir / "observations.csv");
    save_latents_csv(bundle, dir / "latents.csv");
    save_jumps_csv(bundle, dir / "jumps.csv");
    log << "simulated " << bundle.observations.size() << " samples (d = " << bundle.observations.dimension() << ", "
        << bundle.jumps.size() << " jumps) into " << dir.string() << '\n';
    return 0;
}

int cmd_estimate(const HarnessConfig& cfg, std::ostream& log) {
    std::optional<PathBundle> bundle;
    ObservationSet obs;
    if (cfg.data) {
        obs = load_csv(cfg.data->path, cfg.data->delta_n);
        if (obs.dimension() != cfg.dimension()) {
            throw ConfigError("data: file has " + std::to_string(obs.dimension()) + " components, config says d = " +
                              std::to_string(cfg.dimension()));
        }
    } else {
        bundle = simulate(cfg.scenario, 0);
        obs = bundle->observations;
    }
    const Prepared p = prepare(cfg, obs.dimension());
    const GroupResult res = estimate_all(p, obs, cfg.estimator);

    json reports = json::array();
    std::string csv = report_csv_header();
    int failed = 0;
    for (std::size_t i = 0; i < p.functionals.size(); ++i) {
        if (!res.reports[i]) {
            ++failed;
            reports.push_back({{"functional", p.functionals[i].name}, {"error", res.errors[i]}});
            log << p.functionals[i].name << ": " << res.errors[i] << '\n';
            continue;
        }
        const EstimateReport& r = *res.reports[i];
        json jr = report_to_json(r);
        if (bundle) {
            try {
                jr["truth"] = vector_json(true_functional(*bundle, p.functionals[i].f));
            } catch (const Error&) {
                jr["truth"] = nullptr;
            }
        }
        reports.push_back(jr);
        csv += report_to_csv(r);
        log << r.functional << ": S_hat =";
        for (Eigen::Index a = 0; a < r.S_hat.size(); ++a) {
            log << ' ' << format_double(r.S_hat[a]) << " [" << format_double(r.ci[static_cast<std::size_t>(a)].first)
                << ", " << format_double(r.ci[static_cast<std::size_t>(a)].second) << ']';
        }
        log << '\n';
    }

    const auto& dir = cfg.outputs.directory;
    ensure_directory(dir);
    if (cfg.outputs.json) {
        json doc = {{"schema_version", kSchemaVersion}, {"reports", reports}};
        auto out = open_output(dir / "estimate.json");
        out << doc.dump(2) << '\n';
    }
    if (cfg.outputs.csv) {
        auto out = open_output(dir / "estimate.csv");
        out << csv;
    }
    return failed == 0 ? 0 : 1;
}

int cmd_montecarlo(const HarnessConfig& cfg, int threads, std::ostream& log) {
    if (cfg.data) throw ConfigError("montecarlo: config has a data source instead of a scenario");
    const MCSummary s = run_montecarlo(cfg, threads);
    const auto& dir = cfg.outputs.directory;
    ensure_directory(dir);
    if (cfg.outputs.json) {
        auto out = open_output(dir / "summary.json");
        out << summary_to_json(s).dump(2) << '\n';
    }
    if (cfg.outputs.csv) {
        const Prepared p = prepare(cfg, cfg.dimension());
        auto reps = open_output(dir / "replications.csv");
        reps << "replication,functional,component,status,S_hat,S_hat_raw,truth,std_error,ci_lo,ci_hi,covered,z,blocks,"
                "mean_truncated_fraction,psd_projected,guard_violations\n";
        auto zs = open_output(dir / "zscores.csv");
        zs << "functional,component,replication,z\n";
        for (const ReplicationRecord& r : s.records) {
            const std::string& name = p.functionals[r.functional].name;
            reps << r.replication << ',' << name << ',' << r.component << ',' << (r.ok ? "ok" : "failed") << ','
                 << format_double(r.s_hat) << ',' << format_double(r.s_hat_raw) << ',' << format_double(r.truth)
                 << ',' << format_double(r.std_error) << ',' << format_double(r.ci_lo) << ','
                 << format_double(r.ci_hi) << ',' << (r.covered() ? 1 : 0) << ',' << format_double(r.z()) << ','
                 << r.blocks << ',' << format_double(r.truncated_fraction) << ',' << r.psd_projected << ','
                 << r.guard_violations << '\n';
            if (r.ok) zs << name << ',' << r.component << ',' << r.replication << ',' << format_double(r.z()) << '\n';
        }
    }
    for (const ComponentSummary& c : s.components) {
        log << c.functional << '[' << c.component << "]: reps " << c.replications << " (failed " << c.failures
            << "), bias " << format_double(c.mean_bias) << ", raw bias " << format_double(c.mean_raw_bias)
            << ", rmse " << format_double(c.rmse) << ", coverage " << format_double(c.coverage) << ", tail "
            << format_double(c.tail_fraction) << '\n';
    }
    log << "montecarlo: " << cfg.mc.replications << " replications on " << s.threads << " threads in "
        << format_double(s.seconds) << " s\n";
    return 0;
}

}  // namespace hfvol
