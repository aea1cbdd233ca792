#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hfvol/kernel_moments.hpp"
#include "hfvol/sampling.hpp"

namespace hfvol {

enum class TruncationMode { global_norm, per_component, disabled };

TruncationMode truncation_mode_from_string(std::string_view s);
std::string_view to_string(TruncationMode m);

/// Data-driven truncation scale: alpha = factor * (sigma_bar^2)^(exponent / 2),
/// with sigma_bar^2 from pilot_scale. exponent = 1 scales with the pilot
/// volatility, exponent = 2 with the pilot variance.
struct AlphaPilot {
    double factor = 2.0;
    double exponent = 1.0;
};

/// Raw tuning choices before they are turned into window lengths.
struct TuningInputs {
    double theta = 1.0;
    double varrho = 1.0;
    std::optional<double> alpha;  // explicit truncation scale; overrides alpha_pilot
    AlphaPilot alpha_pilot;
    double kappa = 0.69;
    double rho = 0.47;
    double nu = 0.5;
    std::optional<double> theta_prime;  // defaults to theta
    bool floor_mode = false;            // floor instead of round for l_n and k_n
    TruncationMode truncation = TruncationMode::global_norm;
    std::vector<double> per_component_alphas;
};

struct TuningParams {
    double delta_n = 0.0;
    double theta = 1.0;
    double varrho = 1.0;
    double alpha = 0.0;  // 0 until resolved when the pilot rule is in use
    double kappa = 0.0;
    double rho = 0.0;
    double nu = 0.0;
    double theta_prime = 1.0;
    int l_n = 0;
    int k_n = 0;
    int m_n = 0;
    double nu_n = 0.0;
    TruncationMode truncation_mode = TruncationMode::global_norm;
    std::vector<double> per_component_alphas;
    std::optional<AlphaPilot> alpha_pilot;  // set while alpha is unresolved

    /// l_n * sqrt(delta_n): the window scale actually realized after rounding.
    double theta_effective() const;
    /// False while alpha or the per-component alphas still await the pilot.
    bool truncation_resolved() const;
    /// alpha_r * delta_n^rho for every component (per_component mode).
    std::vector<double> component_limits(int d) const;
};

/// Lower end of the admissible rho window for (kappa, nu).
double rho_lower_bound(double kappa, double nu);
/// Lower end of the admissible kappa window for nu.
double kappa_lower_bound(double nu);

/// Checks the rate windows and derives l_n, k_n, m_n, nu_n. Throws
/// ConfigError naming the violated inequality.
TuningParams validate_tuning(double delta_n, const TuningInputs& in);
TuningParams validate_tuning(double delta_n, double theta, double varrho, double alpha, double kappa, double rho,
                             double nu, double theta_prime);

/// psi_n^{-1/2} sum_h phi_h dY_{i+h-1}. Requires 1 <= i and i + l_n - 1 < n.
Eigen::VectorXd bar_increment(const ObservationSet& obs, std::size_t i, const KernelMoments& km);

/// (2 psi_n)^{-1} sum_h (phi_{h+1} - phi_h)^2 dY_{i+h} dY_{i+h}^T, same range.
Eigen::MatrixXd hat_increment(const ObservationSet& obs, std::size_t i, const KernelMoments& km);

/// Per-component average volatility from products of adjacent
/// non-overlapping pre-averaged increments, net of the noise part.
Eigen::VectorXd pilot_scale(const ObservationSet& obs, const KernelMoments& km);

/// Fixes alpha (and per-component alphas) from the pilot when the pilot rule
/// is in force; returns tp unchanged otherwise.
TuningParams resolve_truncation(const TuningParams& tp, const ObservationSet& obs, const KernelMoments& km);

struct ProjectedMatrix {
    Eigen::MatrixXd matrix;
    bool projected = false;
};

/// Frobenius-nearest PSD matrix: symmetrize, clip negative eigenvalues.
ProjectedMatrix psd_project(const Eigen::MatrixXd& a);

struct SpotOptions {
    bool noise_correction = true;
    bool psd_projection = true;
    bool overlapping = false;  // one block per sample instead of every k_n
};

/// Pre-averaged increments for every admissible start i = 1..n-l_n, all
/// components at once. Shared by every block of a series.
class PreaveragedPath {
public:
    PreaveragedPath(const ObservationSet& obs, const KernelMoments& km);

    int dimension() const { return d_; }
    std::size_t sample_count() const { return n_; }
    /// Largest admissible start index (n - l_n).
    std::size_t last_index() const { return n_ - static_cast<std::size_t>(l_); }

    /// Ybar_r(i) at position i - 1.
    std::span<const double> bar(int r) const { return {bar_.data() + static_cast<std::size_t>(r) * len_, len_}; }
    /// Uhat_rs(i) at position i - 1, r <= s.
    std::span<const double> hat(int r, int s) const;

private:
    int d_ = 0;
    int l_ = 0;
    std::size_t n_ = 0;
    std::size_t len_ = 0;
    std::vector<double> bar_;
    std::vector<double> hat_;
};

struct SpotEstimate {
    Eigen::MatrixXd c;
    double truncated_fraction = 0.0;
    std::size_t summands = 0;
};

/// Truncated spot covariance over the block starting at i. Requires
/// i + k_n < n and a resolved truncation threshold.
SpotEstimate spot_cov(const ObservationSet& obs, std::size_t block_start, const TuningParams& tp,
                      const KernelMoments& km, const SpotOptions& opts = {});
SpotEstimate spot_cov(const PreaveragedPath& path, std::size_t block_start, const TuningParams& tp,
                      const SpotOptions& opts = {});

/// (1 / (2 m_n)) sum_{h=1}^{m_n} dY_{i+h} dY_{i+h}^T. Requires i + m_n < n.
Eigen::MatrixXd spot_noise(const ObservationSet& obs, std::size_t block_start, const TuningParams& tp);

struct SpotSeries {
    std::size_t stride = 0;  // samples between block starts
    std::vector<std::size_t> block_indices;
    std::vector<Eigen::MatrixXd> c_hat;
    std::vector<Eigen::MatrixXd> gamma_hat;
    std::vector<double> truncated_fraction;
    std::vector<bool> psd_projected;

    std::size_t size() const { return block_indices.size(); }
};

/// Spot estimates at block starts i * k_n, i < floor(n / k_n). When k_n
/// divides n the final block has one summand fewer. Requires a resolved
/// truncation threshold.
SpotSeries spot_series(const ObservationSet& obs, const TuningParams& tp, const KernelMoments& km,
                       const SpotOptions& opts = {});

}  // namespace hfvol
