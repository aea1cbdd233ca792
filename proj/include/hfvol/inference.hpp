#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hfvol/functional.hpp"
#include "hfvol/kernel_moments.hpp"
#include "hfvol/preaveraging.hpp"
#include "hfvol/sampling.hpp"

namespace hfvol {

struct EstimateOptions {
    SpotOptions spot;
    double level = 0.95;
};

struct EstimateDiagnostics {
    std::size_t blocks = 0;
    double mean_truncated_fraction = 0.0;
    std::size_t psd_projected = 0;
    std::size_t guard_violations = 0;
};

struct EstimateReport {
    std::string functional;
    double t = 0.0;
    double delta_n = 0.0;
    Eigen::VectorXd S_hat;
    Eigen::VectorXd S_hat_raw;
    Eigen::VectorXd bias_total;
    Eigen::MatrixXd V_hat;
    Eigen::VectorXd std_error;  // sqrt(delta_n^{1/2} V_hat_rr)
    std::vector<std::pair<double, double>> ci;
    double level = 0.95;
    double a_n_t = 1.0;
    EstimateDiagnostics diagnostics;
    TuningParams tuning;
};

/// Inverse standard normal CDF (rational approximation, |error| < 1.2e-9
/// before refinement). Throws ConfigError outside (0, 1).
double normal_quantile(double p);

/// Second-order plug-in correction (1 / (2 k_n delta_n^{1/2})) sum H(c) : Xi(c, gamma).
/// c must pass the functional's guard.
Eigen::VectorXd bias_term(const Eigen::MatrixXd& c_hat, const Eigen::MatrixXd& gamma_hat, const Functional& f,
                          const TuningParams& tp, const KernelMoments& km);

/// Plug-in asymptotic covariance k_n delta_n sum_blocks grad g grad g^T : Xi.
Eigen::MatrixXd avar(const SpotSeries& spot, const Functional& f, const TuningParams& tp, const KernelMoments& km);

/// S_hat_r +- z_{(1+level)/2} sqrt(delta_n^{1/2} V_hat_rr). Throws
/// NumericalError on a negative diagonal.
std::vector<std::pair<double, double>> confidence_interval(const Eigen::VectorXd& s_hat, const Eigen::MatrixXd& v_hat,
                                                           double delta_n, double level);

/// Full pipeline: resolve the truncation scale, build the spot series and
/// aggregate. Throws InsufficientDataError for zero blocks and GuardError
/// when every block fails the functional's guard.
EstimateReport estimate(const ObservationSet& obs, const Functional& f, const TuningParams& tp, const KernelMoments& km,
                        const EstimateOptions& opts = {});

/// Aggregation step for a precomputed series (several functionals can share
/// one series). tp must be the resolved tuning used to build `spot`.
EstimateReport estimate_from_spot(const SpotSeries& spot, std::size_t n, const Functional& f, const TuningParams& tp,
                                  const KernelMoments& km, const EstimateOptions& opts = {});

}  // namespace hfvol
