#include "hfvol/simulation.hpp"

#include <cmath>

#include "hfvol/errors.hpp"
#include "hfvol/rng.hpp"

namespace hfvol {
namespace {

enum Channel : std::uint32_t {
    kDiffusion = 0,
    kVolShock = 1,
    kPriceJumpCount = 2,
    kPriceJumpSize = 3,
    kVolJumpCount = 4,
    kVolJumpSize = 5,
    kNoise = 6,
};

void add_noise(const ScenarioConfig& cfg, std::uint64_t rep, const std::vector<double>& x, std::vector<double>& y) {
    y = x;
    if (cfg.noise_sd.empty()) return;
    RandomStream rng(cfg.seed, rep, kNoise);
    for (int r = 0; r < cfg.d; ++r) {
        const double sd = cfg.noise_sd[static_cast<std::size_t>(r)];
        for (std::size_t i = 0; i < cfg.n; ++i) y[static_cast<std::size_t>(r) * cfg.n + i] += sd * rng.normal();
    }
}

PathBundle finish(const ScenarioConfig& cfg, std::uint64_t rep, std::vector<double> x, std::vector<Eigen::MatrixXd> c,
                  std::vector<JumpEvent> jumps) {
    std::vector<double> y;
    add_noise(cfg, rep, x, y);
    PathBundle b;
    b.observations = ObservationSet(RegularGrid{cfg.delta_n, cfg.n}, cfg.d, std::move(y));
    b.latent_x = std::move(x);
    b.latent_c = std::move(c);
    b.jumps = std::move(jumps);
    b.noise_sd = cfg.noise_sd.empty() ? std::vector<double>(static_cast<std::size_t>(cfg.d), 0.0) : cfg.noise_sd;
    return b;
}

PathBundle simulate_heston(const ScenarioConfig& cfg, std::uint64_t rep) {
    const std::size_t n = cfg.n;
    const double dt = cfg.delta_n / cfg.substeps;
    const double sqdt = std::sqrt(dt);
    const double rho = cfg.leverage;
    const double rho_perp = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    RandomStream dw(cfg.seed, rep, kDiffusion), db(cfg.seed, rep, kVolShock);
    RandomStream pj_n(cfg.seed, rep, kPriceJumpCount), pj_s(cfg.seed, rep, kPriceJumpSize);
    RandomStream vj_n(cfg.seed, rep, kVolJumpCount), vj_s(cfg.seed, rep, kVolJumpSize);
    const double lam_x = cfg.price_jump_intensity * dt;
    const double lam_c = cfg.vol_jump_intensity * dt;
    const double vj_sd = std::sqrt(cfg.vol_jump_log_var);

    std::vector<double> x(n);
    std::vector<Eigen::MatrixXd> c(n, Eigen::MatrixXd(1, 1));
    std::vector<JumpEvent> jumps;
    double xx = cfg.x0;
    double cc = cfg.c0;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = xx;
        c[i](0, 0) = std::max(cc, 0.0);
        double step_jump = 0.0;
        bool jumped = false;
        for (int s = 0; s < cfg.substeps; ++s) {
            const double cp = std::max(cc, 0.0);
            const double sc = std::sqrt(cp);
            const double z1 = dw.normal();
            const double z2 = db.normal();
            xx += cfg.drift * dt + sc * sqdt * z1;
            if (lam_x > 0.0) {
                for (std::uint32_t k = pj_n.poisson(lam_x); k > 0; --k) {
                    const double j = cfg.price_jump_mean + cfg.price_jump_sd * pj_s.normal();
                    xx += j;
                    step_jump += j;
                    jumped = true;
                }
            }
            cc += cfg.mean_reversion * (cfg.level - cp) * dt + cfg.vol_of_vol * sc * sqdt * (rho * z1 + rho_perp * z2);
            if (lam_c > 0.0) {
                for (std::uint32_t k = vj_n.poisson(lam_c); k > 0; --k) {
                    cc += std::sqrt(std::max(cc, 0.0)) * std::exp(cfg.vol_jump_log_mean + vj_sd * vj_s.normal());
                }
            }
        }
        if (jumped && i + 1 < n) jumps.push_back({i + 1, Eigen::VectorXd::Constant(1, step_jump)});
    }
    return finish(cfg, rep, std::move(x), std::move(c), std::move(jumps));
}

PathBundle simulate_constant(const ScenarioConfig& cfg, const Eigen::MatrixXd& cov, std::uint64_t rep) {
    const std::size_t n = cfg.n;
    const int d = cfg.d;
    const double dt = cfg.delta_n / cfg.substeps;
    const double sqdt = std::sqrt(dt);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    Eigen::MatrixXd chol;
    if (llt.info() == Eigen::Success) {
        chol = llt.matrixL();
    } else {
        // Singular but PSD: factor through the eigendecomposition.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        chol = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    RandomStream dw(cfg.seed, rep, kDiffusion);
    RandomStream pj_n(cfg.seed, rep, kPriceJumpCount), pj_s(cfg.seed, rep, kPriceJumpSize);
    const double lam_x = cfg.price_jump_intensity * dt;

    std::vector<double> x(static_cast<std::size_t>(d) * n);
    std::vector<Eigen::MatrixXd> c(n, cov);
    std::vector<JumpEvent> jumps;
    Eigen::VectorXd xx = Eigen::VectorXd::Constant(d, cfg.x0);
    Eigen::VectorXd z(d), step_jump(d);
    for (std::size_t i = 0; i < n; ++i) {
        for (int r = 0; r < d; ++r) x[static_cast<std::size_t>(r) * n + i] = xx[r];
        step_jump.setZero();
        bool jumped = false;
        for (int s = 0; s < cfg.substeps; ++s) {
            for (int r = 0; r < d; ++r) z[r] = dw.normal();
            xx.array() += cfg.drift * dt;
            xx.noalias() += sqdt * (chol * z);
            if (lam_x > 0.0) {
                for (std::uint32_t k = pj_n.poisson(lam_x); k > 0; --k) {
                    for (int r = 0; r < d; ++r) {
                        const double j = cfg.price_jump_mean + cfg.price_jump_sd * pj_s.normal();
                        xx[r] += j;
                        step_jump[r] += j;
                    }
                    jumped = true;
                }
            }
        }
        if (jumped && i + 1 < n) jumps.push_back({i + 1, step_jump});
    }
    return finish(cfg, rep, std::move(x), std::move(c), std::move(jumps));
}

}  // namespace

ScenarioKind scenario_kind_from_string(std::string_view s) {
    if (s == "heston_jumps" || s == "custom") return ScenarioKind::heston_jumps;
    if (s == "constant_vol") return ScenarioKind::constant_vol;
    if (s == "regression_factor") return ScenarioKind::regression_factor;
    throw ConfigError("unknown scenario kind '" + std::string(s) +
                      "' (expected heston_jumps, constant_vol, regression_factor or custom)");
}

std::string_view to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::heston_jumps: return "heston_jumps";
        case ScenarioKind::constant_vol: return "constant_vol";
        case ScenarioKind::regression_factor: return "regression_factor";
    }
    return "?";
}

void ScenarioConfig::validate() const {
    if (d < 1 || d > kMaxDimension) throw ConfigError("scenario: d must lie in [1, 64]");
    if (!(delta_n > 0.0) || !std::isfinite(delta_n)) throw ConfigError("scenario: delta_n must be positive");
    if (n < 2) throw ConfigError("scenario: need at least 2 samples");
    if (substeps < 1) throw ConfigError("scenario: substeps must be >= 1");
    if (price_jump_intensity < 0.0 || vol_jump_intensity < 0.0) throw ConfigError("scenario: jump intensities must be >= 0");
    if (price_jump_sd < 0.0) throw ConfigError("scenario: price_jump_sd must be >= 0");
    if (vol_jump_log_var < 0.0) throw ConfigError("scenario: vol_jump_log_var must be >= 0");
    if (!noise_sd.empty()) {
        if (noise_sd.size() != static_cast<std::size_t>(d)) throw ConfigError("scenario: noise_sd needs one entry per component");
        for (double s : noise_sd) {
            if (!(s >= 0.0)) throw ConfigError("scenario: noise_sd entries must be >= 0");
        }
    }
    switch (kind) {
        case ScenarioKind::heston_jumps:
            if (d != 1) throw ConfigError("scenario: heston_jumps is univariate (d = 1)");
            if (!(level > 0.0)) throw ConfigError("scenario: mean-reversion level must be > 0");
            if (mean_reversion < 0.0) throw ConfigError("scenario: mean_reversion must be >= 0");
            if (vol_of_vol < 0.0) throw ConfigError("scenario: vol_of_vol must be >= 0");
            if (std::abs(leverage) > 1.0) throw ConfigError("scenario: |leverage| must be <= 1");
            if (c0 < 0.0) throw ConfigError("scenario: c0 must be >= 0");
            break;
        case ScenarioKind::constant_vol: {
            if (constant_c.rows() != d || constant_c.cols() != d) throw ConfigError("scenario: constant_c must be d x d");
            if (!constant_c.isApprox(constant_c.transpose(), 1e-12)) throw ConfigError("scenario: constant_c must be symmetric");
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(constant_c, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-14) throw ConfigError("scenario: constant_c must be PSD");
            break;
        }
        case ScenarioKind::regression_factor:
            if (d < 2) throw ConfigError("scenario: regression_factor needs d >= 2");
            if (regressor_sd.size() != static_cast<std::size_t>(d - 1) || beta.size() != static_cast<std::size_t>(d - 1)) {
                throw ConfigError("scenario: regressor_sd and beta need d - 1 entries");
            }
            for (double s : regressor_sd) {
                if (!(s >= 0.0)) throw ConfigError("scenario: regressor_sd entries must be >= 0");
            }
            if (!(residual_sd >= 0.0)) throw ConfigError("scenario: residual_sd must be >= 0");
            break;
    }
}

ScenarioConfig heston_jumps_scenario(int days) {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::heston_jumps;
    cfg.delta_n = 1.0 / (23400.0 * 252.0);
    cfg.n = static_cast<std::size_t>(23400) * static_cast<std::size_t>(days);
    cfg.drift = 0.03;
    cfg.c0 = 0.16;
    cfg.mean_reversion = 6.0;
    cfg.level = 0.16;
    cfg.vol_of_vol = 0.5;
    cfg.leverage = -0.6;
    cfg.price_jump_intensity = 36.0;
    cfg.price_jump_mean = -0.01;
    cfg.price_jump_sd = 0.02;
    cfg.vol_jump_intensity = 12.0;
    cfg.vol_jump_log_mean = -5.0;
    cfg.vol_jump_log_var = 0.8;
    cfg.noise_sd = {0.005};
    return cfg;
}

ScenarioConfig constant_vol_scenario(double c, double days) {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::constant_vol;
    cfg.delta_n = 1.0 / 23400.0;
    cfg.n = static_cast<std::size_t>(std::llround(23400.0 * days));
    cfg.constant_c = Eigen::MatrixXd::Constant(1, 1, c);
    return cfg;
}

ScenarioConfig regression_scenario(double beta, double regressor_sd, double residual_sd, double days) {
    ScenarioConfig cfg;
    cfg.kind = ScenarioKind::regression_factor;
    cfg.d = 2;
    cfg.delta_n = 1.0 / 23400.0;
    cfg.n = static_cast<std::size_t>(std::llround(23400.0 * days));
    cfg.regressor_sd = {regressor_sd};
    cfg.residual_sd = residual_sd;
    cfg.beta = {beta};
    return cfg;
}

Eigen::MatrixXd regression_covariance(const ScenarioConfig& cfg) {
    const int d = cfg.d;
    const int s = d - 1;
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
    for (int r = 0; r < s; ++r) sigma(r, r) = cfg.regressor_sd[static_cast<std::size_t>(r)];
    Eigen::VectorXd beta(s);
    for (int r = 0; r < s; ++r) beta[r] = cfg.beta[static_cast<std::size_t>(r)];
    sigma.block(s, 0, 1, s) = beta.transpose() * sigma.topLeftCorner(s, s);
    sigma(s, s) = cfg.residual_sd;
    return sigma * sigma.transpose();
}

PathBundle simulate(const ScenarioConfig& cfg, std::uint64_t replication) {
    cfg.validate();
    switch (cfg.kind) {
        case ScenarioKind::heston_jumps: return simulate_heston(cfg, replication);
        case ScenarioKind::constant_vol: return simulate_constant(cfg, cfg.constant_c, replication);
        case ScenarioKind::regression_factor: return simulate_regression(cfg, replication);
    }
    throw ConfigError("unknown scenario kind");
}

PathBundle simulate_regression(const ScenarioConfig& cfg, std::uint64_t replication) {
    if (cfg.kind != ScenarioKind::regression_factor) throw ConfigError("simulate_regression: scenario kind must be regression_factor");
    cfg.validate();
    return simulate_constant(cfg, regression_covariance(cfg), replication);
}

Eigen::VectorXd true_functional(const PathBundle& bundle, const Functional& f) {
    if (bundle.latent_c.empty()) throw ConfigError("true_functional: bundle has no latent covariance path");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(f.output_dim);
    const Eigen::MatrixXd* prev = nullptr;
    Eigen::VectorXd prev_value;
    for (const auto& c : bundle.latent_c) {
        // Flat stretches (constant scenarios) reuse the previous evaluation.
        if (prev == nullptr || c != *prev) {
            f.check(c);
            prev_value = f.value(c);
            prev = &c;
        }
        acc += prev_value;
    }
    return bundle.observations.grid().delta_n * acc;
}

}  // namespace hfvol
