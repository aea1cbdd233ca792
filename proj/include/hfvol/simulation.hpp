#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hfvol/functional.hpp"
#include "hfvol/sampling.hpp"

namespace hfvol {

enum class ScenarioKind { heston_jumps, constant_vol, regression_factor };

ScenarioKind scenario_kind_from_string(std::string_view s);
std::string_view to_string(ScenarioKind k);

/// Simulation model. Rates and intensities are per unit time; delta_n fixes
/// the unit (1/23400 for days of 6.5 h at one-second sampling).
struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::heston_jumps;
    int d = 1;
    double delta_n = 1.0 / 23400.0;
    std::size_t n = 23400;
    int substeps = 1;  // Euler steps per observation

    double x0 = 0.0;
    double drift = 0.0;

    // Square-root variance (heston_jumps, d = 1).
    double c0 = 0.16;
    double mean_reversion = 6.0;
    double level = 0.16;
    double vol_of_vol = 0.5;
    double leverage = -0.6;

    // Constant covariance (constant_vol); d x d.
    Eigen::MatrixXd constant_c = Eigen::MatrixXd::Constant(1, 1, 0.04);

    // Regression factor model: regressor vols (d - 1), residual vol, loadings.
    std::vector<double> regressor_sd;
    double residual_sd = 0.1;
    std::vector<double> beta;

    double price_jump_intensity = 0.0;
    double price_jump_mean = 0.0;
    double price_jump_sd = 0.0;

    double vol_jump_intensity = 0.0;
    double vol_jump_log_mean = -5.0;
    double vol_jump_log_var = 0.8;

    std::vector<double> noise_sd;  // per component; empty means noiseless

    std::uint64_t seed = 1;

    /// Throws ConfigError on invalid parameters.
    void validate() const;
};

/// Defaults: drift .03, dc = 6(.16 - c)dt + .5 sqrt(c) dB + sqrt(c-) J dN,
/// corr(dW, dB) = -.6, 36 price jumps N(-.01, .02^2) and 12 volatility jumps
/// per unit time, noise sd .005. Time in years of 252 days; 21 days of
/// one-second samples.
ScenarioConfig heston_jumps_scenario(int days = 21);

/// Flat volatility c on a one-second grid over `days` days, no jumps or noise.
ScenarioConfig constant_vol_scenario(double c = 0.04, double days = 1.0);

/// Two-factor regression model with Z = beta S + R.
ScenarioConfig regression_scenario(double beta = 0.3, double regressor_sd = 0.2, double residual_sd = 0.1,
                                   double days = 1.0);

/// Draws one path; replication selects an independent stream family.
PathBundle simulate(const ScenarioConfig& cfg, std::uint64_t replication = 0);

/// Regression factor model: sigma = [[sigma_S, 0], [beta^T sigma_S, sigma_R]].
PathBundle simulate_regression(const ScenarioConfig& cfg, std::uint64_t replication = 0);

/// Spot covariance of the regression factor model.
Eigen::MatrixXd regression_covariance(const ScenarioConfig& cfg);

/// delta_n sum_i g(latent_c_i). Throws GuardError if a latent point fails
/// the functional's guard.
Eigen::VectorXd true_functional(const PathBundle& bundle, const Functional& f);

}  // namespace hfvol
