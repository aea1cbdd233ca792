#include "hfvol/preaveraging.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hfvol/errors.hpp"
#include "hfvol/simd.hpp"

namespace hfvol {
namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// floor() that forgives pow() landing one ulp below an integer.
int safe_floor(double x) { return static_cast<int>(std::floor(x * (1.0 + 1e-12))); }

int window(double scale, double rate_power, bool floor_mode) {
    const double x = scale * rate_power;
    return floor_mode ? safe_floor(x) : static_cast<int>(std::floor(x + 0.5));
}

std::size_t pair_index(int r, int s, int d) {
    if (r > s) std::swap(r, s);
    return static_cast<std::size_t>(r * d - r * (r - 1) / 2 + (s - r));
}

void require_resolved(const TuningParams& tp) {
    if (!tp.truncation_resolved()) {
        throw ConfigError("truncation threshold depends on the pilot scale; call resolve_truncation first");
    }
}

// Block over Ybar/Uhat positions [p, p + count) normalized by norm_count * delta_n.
SpotEstimate block_estimate(const PreaveragedPath& path, std::size_t p, std::size_t count, std::size_t norm_count,
                            const TuningParams& tp, const SpotOptions& opts, std::vector<unsigned char>& mask) {
    const auto& k = simd::active();
    const int d = path.dimension();
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
    std::size_t kept = count;

    if (d == 1) {
        const auto x = path.bar(0).subspan(p, count);
        if (tp.truncation_mode == TruncationMode::disabled) {
            c(0, 0) = k.dot(x, x);
        } else {
            const double limit = tp.truncation_mode == TruncationMode::global_norm ? tp.nu_n : tp.component_limits(1)[0];
            const auto t = k.truncated_square_sum(x, limit);
            c(0, 0) = t.sum;
            kept = t.kept;
        }
    } else {
        mask.assign(count, 1);
        if (tp.truncation_mode == TruncationMode::global_norm) {
            const double limit2 = tp.nu_n * tp.nu_n;
            for (std::size_t q = 0; q < count; ++q) {
                double norm2 = 0.0;
                for (int r = 0; r < d; ++r) {
                    const double v = path.bar(r)[p + q];
                    norm2 += v * v;
                }
                mask[q] = norm2 <= limit2;
            }
        } else if (tp.truncation_mode == TruncationMode::per_component) {
            const auto limits = tp.component_limits(d);
            for (std::size_t q = 0; q < count; ++q) {
                for (int r = 0; r < d; ++r) {
                    if (std::abs(path.bar(r)[p + q]) > limits[static_cast<std::size_t>(r)]) {
                        mask[q] = 0;
                        break;
                    }
                }
            }
        }
        kept = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
        for (int r = 0; r < d; ++r) {
            for (int s = r; s < d; ++s) {
                const double v = k.masked_dot(path.bar(r).subspan(p, count), path.bar(s).subspan(p, count), mask);
                c(r, s) = v;
                c(s, r) = v;
            }
        }
    }

    if (opts.noise_correction) {
        for (int r = 0; r < d; ++r) {
            for (int s = r; s < d; ++s) {
                const double v = k.sum(path.hat(r, s).subspan(p, count));
                c(r, s) -= v;
                if (s != r) c(s, r) -= v;
            }
        }
    }

    SpotEstimate out;
    out.c = c / (static_cast<double>(norm_count) * tp.delta_n);
    out.summands = count;
    out.truncated_fraction = static_cast<double>(count - kept) / static_cast<double>(count);
    return out;
}

}  // namespace

TruncationMode truncation_mode_from_string(std::string_view s) {
    if (s == "global_norm" || s == "global") return TruncationMode::global_norm;
    if (s == "per_component") return TruncationMode::per_component;
    if (s == "disabled" || s == "off" || s == "none") return TruncationMode::disabled;
    throw ConfigError("unknown truncation mode '" + std::string(s) + "' (expected global_norm, per_component or disabled)");
}

std::string_view to_string(TruncationMode m) {
    switch (m) {
        case TruncationMode::global_norm: return "global_norm";
        case TruncationMode::per_component: return "per_component";
        case TruncationMode::disabled: return "disabled";
    }
    return "?";
}

double TuningParams::theta_effective() const { return static_cast<double>(l_n) * std::sqrt(delta_n); }

bool TuningParams::truncation_resolved() const {
    switch (truncation_mode) {
        case TruncationMode::disabled: return true;
        case TruncationMode::per_component: return !per_component_alphas.empty();
        case TruncationMode::global_norm: return !alpha_pilot;
    }
    return false;
}

std::vector<double> TuningParams::component_limits(int d) const {
    if (per_component_alphas.size() != static_cast<std::size_t>(d)) {
        throw ConfigError("per_component_alphas has " + std::to_string(per_component_alphas.size()) +
                          " entries, data dimension is " + std::to_string(d));
    }
    std::vector<double> out(per_component_alphas.size());
    const double rate = std::pow(delta_n, rho);
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = per_component_alphas[r] * rate;
    return out;
}

double kappa_lower_bound(double nu) { return std::max(2.0 / 3.0, (2.0 + nu) / 4.0); }

double rho_lower_bound(double kappa, double nu) { return 0.25 + (1.0 - kappa) / (2.0 - nu); }

TuningParams validate_tuning(double delta_n, const TuningInputs& in) {
    if (!(delta_n > 0.0) || !std::isfinite(delta_n)) throw ConfigError("tuning: delta_n must be positive, got " + fmt(delta_n));
    if (!(in.theta > 0.0)) throw ConfigError("tuning: theta must be > 0, got " + fmt(in.theta));
    if (!(in.varrho > 0.0)) throw ConfigError("tuning: varrho must be > 0, got " + fmt(in.varrho));
    if (in.alpha && !(*in.alpha > 0.0)) throw ConfigError("tuning: alpha must be > 0, got " + fmt(*in.alpha));
    if (!in.alpha && !(in.alpha_pilot.factor > 0.0)) {
        throw ConfigError("tuning: alpha_pilot.factor must be > 0, got " + fmt(in.alpha_pilot.factor));
    }
    const double theta_prime = in.theta_prime.value_or(in.theta);
    if (!(theta_prime > 0.0)) throw ConfigError("tuning: theta_prime must be > 0, got " + fmt(theta_prime));
    if (!(in.nu >= 0.0 && in.nu < 1.0)) {
        throw ConfigError("tuning: jump activity nu must lie in [0, 1), got " + fmt(in.nu) +
                          " (for nu = 1 the kappa and rho windows are empty)");
    }
    const double kappa_lo = kappa_lower_bound(in.nu);
    if (!(in.kappa > kappa_lo && in.kappa < 0.75)) {
        throw ConfigError("tuning: kappa = " + fmt(in.kappa) + " violates max(2/3, (2+nu)/4) = " + fmt(kappa_lo) +
                          " < kappa < 3/4");
    }
    const double rho_lo = rho_lower_bound(in.kappa, in.nu);
    if (!(in.rho >= rho_lo && in.rho < 0.5)) {
        throw ConfigError("tuning: rho = " + fmt(in.rho) + " violates 1/4 + (1-kappa)/(2-nu) = " + fmt(rho_lo) +
                          " <= rho < 1/2");
    }
    for (double a : in.per_component_alphas) {
        if (!(a > 0.0)) throw ConfigError("tuning: per_component_alphas entries must be > 0");
    }

    TuningParams tp;
    tp.delta_n = delta_n;
    tp.theta = in.theta;
    tp.varrho = in.varrho;
    tp.kappa = in.kappa;
    tp.rho = in.rho;
    tp.nu = in.nu;
    tp.theta_prime = theta_prime;
    tp.truncation_mode = in.truncation;
    tp.per_component_alphas = in.per_component_alphas;
    tp.l_n = window(in.theta, std::pow(delta_n, -0.5), in.floor_mode);
    tp.k_n = window(in.varrho, std::pow(delta_n, -in.kappa), in.floor_mode);
    tp.m_n = safe_floor(theta_prime * std::pow(delta_n, -0.5));
    if (tp.l_n < 2) throw ConfigError("tuning: l_n = " + std::to_string(tp.l_n) + " < 2 (window empty)");
    if (tp.m_n < 1) throw ConfigError("tuning: m_n = " + std::to_string(tp.m_n) + " < 1 (window empty)");
    if (tp.k_n <= tp.l_n) {
        throw ConfigError("tuning: k_n = " + std::to_string(tp.k_n) + " must exceed l_n = " + std::to_string(tp.l_n));
    }
    if (in.alpha) {
        tp.alpha = *in.alpha;
        tp.nu_n = tp.alpha * std::pow(delta_n, in.rho);
    } else {
        tp.alpha_pilot = in.alpha_pilot;
    }
    return tp;
}

TuningParams validate_tuning(double delta_n, double theta, double varrho, double alpha, double kappa, double rho,
                             double nu, double theta_prime) {
    TuningInputs in;
    in.theta = theta;
    in.varrho = varrho;
    in.alpha = alpha;
    in.kappa = kappa;
    in.rho = rho;
    in.nu = nu;
    in.theta_prime = theta_prime;
    return validate_tuning(delta_n, in);
}

Eigen::VectorXd bar_increment(const ObservationSet& obs, std::size_t i, const KernelMoments& km) {
    const auto l = static_cast<std::size_t>(km.l_n);
    if (i < 1 || i + l - 1 >= obs.size()) {
        throw RangeError("bar_increment: window [" + std::to_string(i) + ", " + std::to_string(i + l - 1) +
                         "] overruns the sample (n = " + std::to_string(obs.size()) + ")");
    }
    const double scale = 1.0 / std::sqrt(km.psi_n);
    Eigen::VectorXd out(obs.dimension());
    for (int r = 0; r < obs.dimension(); ++r) {
        const auto y = obs.component(r);
        double acc = 0.0;
        for (std::size_t h = 1; h < l; ++h) acc += km.weights[h - 1] * (y[i + h - 1] - y[i + h - 2]);
        out[r] = scale * acc;
    }
    return out;
}

Eigen::MatrixXd hat_increment(const ObservationSet& obs, std::size_t i, const KernelMoments& km) {
    const auto l = static_cast<std::size_t>(km.l_n);
    if (i < 1 || i + l - 1 >= obs.size()) {
        throw RangeError("hat_increment: window [" + std::to_string(i) + ", " + std::to_string(i + l - 1) +
                         "] overruns the sample (n = " + std::to_string(obs.size()) + ")");
    }
    const int d = obs.dimension();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd dy(d);
    for (std::size_t h = 0; h < l; ++h) {
        for (int r = 0; r < d; ++r) dy[r] = obs.at(i + h, r) - obs.at(i + h - 1, r);
        out.noalias() += km.diff_squares[h] * dy * dy.transpose();
    }
    return (out + out.transpose()) / (4.0 * km.psi_n);
}

Eigen::VectorXd pilot_scale(const ObservationSet& obs, const KernelMoments& km) {
    const std::size_t n = obs.size();
    const auto l = static_cast<std::size_t>(km.l_n);
    if (n <= 2 * l) {
        throw InsufficientDataError("pilot_scale: need n > 2 l_n, got n = " + std::to_string(n) + ", l_n = " + std::to_string(l));
    }
    std::vector<std::size_t> starts;
    for (std::size_t i = 1; i + l <= n; i += l) starts.push_back(i);
    if (starts.size() < 3) throw InsufficientDataError("pilot_scale: fewer than 3 non-overlapping windows");

    const auto& k = simd::active();
    const double inv_sqrt_psi = 1.0 / std::sqrt(km.psi_n);
    const double m = static_cast<double>(starts.size());
    Eigen::VectorXd out(obs.dimension());
    std::vector<double> bars(starts.size());
    std::vector<double> sq(l);
    for (int r = 0; r < obs.dimension(); ++r) {
        const auto inc = increments(obs.component(r));
        double noise = 0.0;
        for (std::size_t j = 0; j < starts.size(); ++j) {
            const std::size_t p = starts[j] - 1;
            bars[j] = inv_sqrt_psi * k.dot(std::span<const double>(inc).subspan(p, l - 1), km.weights);
            for (std::size_t h = 0; h < l; ++h) sq[h] = inc[p + h] * inc[p + h];
            noise += k.dot(sq, km.diff_squares) / (2.0 * km.psi_n);
        }
        double bipower = 0.0;
        for (std::size_t j = 0; j + 1 < bars.size(); ++j) bipower += std::abs(bars[j]) * std::abs(bars[j + 1]);
        bipower *= (std::numbers::pi / 2.0) / (m - 1.0);
        out[r] = std::max(0.0, (bipower - noise / m) / obs.grid().delta_n);
    }
    return out;
}

TuningParams resolve_truncation(const TuningParams& tp, const ObservationSet& obs, const KernelMoments& km) {
    if (tp.truncation_resolved()) return tp;
    TuningParams out = tp;
    const Eigen::VectorXd pilot = pilot_scale(obs, km);
    if (tp.alpha_pilot) {
        const auto& rule = *tp.alpha_pilot;
        out.alpha = rule.factor * std::pow(pilot.sum(), rule.exponent / 2.0);
        if (tp.truncation_mode == TruncationMode::per_component && tp.per_component_alphas.empty()) {
            out.per_component_alphas.resize(static_cast<std::size_t>(pilot.size()));
            for (Eigen::Index r = 0; r < pilot.size(); ++r) {
                out.per_component_alphas[static_cast<std::size_t>(r)] = rule.factor * std::pow(pilot[r], rule.exponent / 2.0);
            }
        }
        out.alpha_pilot.reset();
    } else {
        const double pooled = std::sqrt(pilot.mean());
        out.per_component_alphas.resize(static_cast<std::size_t>(pilot.size()));
        for (Eigen::Index r = 0; r < pilot.size(); ++r) {
            out.per_component_alphas[static_cast<std::size_t>(r)] =
                pooled > 0.0 ? tp.alpha * std::sqrt(pilot[r]) / pooled : tp.alpha;
        }
    }
    out.nu_n = out.alpha * std::pow(out.delta_n, out.rho);
    return out;
}

ProjectedMatrix psd_project(const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
    if (sym.rows() == 1) {
        if (sym(0, 0) >= 0.0) return {sym, false};
        return {Eigen::MatrixXd::Zero(1, 1), true};
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    if (es.info() != Eigen::Success) throw NumericalError("psd_project: eigensolver failed");
    const Eigen::VectorXd& lambda = es.eigenvalues();
    if (lambda.minCoeff() >= 0.0) return {sym, false};
    const Eigen::MatrixXd& q = es.eigenvectors();
    Eigen::MatrixXd out = q * lambda.cwiseMax(0.0).asDiagonal() * q.transpose();
    out = 0.5 * (out + out.transpose());
    return {out, true};
}

PreaveragedPath::PreaveragedPath(const ObservationSet& obs, const KernelMoments& km)
    : d_(obs.dimension()), l_(km.l_n), n_(obs.size()) {
    const auto l = static_cast<std::size_t>(l_);
    if (n_ < l + 1) {
        throw InsufficientDataError("sample of " + std::to_string(n_) + " points is shorter than one smoothing window (l_n = " +
                                    std::to_string(l_) + ")");
    }
    len_ = n_ - l;
    const auto& k = simd::active();
    const double inv_sqrt_psi = 1.0 / std::sqrt(km.psi_n);
    const double inv_two_psi = 1.0 / (2.0 * km.psi_n);

    std::vector<std::vector<double>> inc(static_cast<std::size_t>(d_));
    for (int r = 0; r < d_; ++r) inc[static_cast<std::size_t>(r)] = increments(obs.component(r));

    bar_.resize(static_cast<std::size_t>(d_) * len_);
    for (int r = 0; r < d_; ++r) {
        std::span<double> out(bar_.data() + static_cast<std::size_t>(r) * len_, len_);
        k.sliding_dot(inc[static_cast<std::size_t>(r)], km.weights, out);
        for (double& v : out) v *= inv_sqrt_psi;
    }

    const std::size_t pairs = static_cast<std::size_t>(d_) * static_cast<std::size_t>(d_ + 1) / 2;
    hat_.resize(pairs * len_);
    std::vector<double> prod(n_ - 1);
    for (int r = 0; r < d_; ++r) {
        for (int s = r; s < d_; ++s) {
            const auto& a = inc[static_cast<std::size_t>(r)];
            const auto& b = inc[static_cast<std::size_t>(s)];
            for (std::size_t j = 0; j < prod.size(); ++j) prod[j] = a[j] * b[j];
            std::span<double> out(hat_.data() + pair_index(r, s, d_) * len_, len_);
            k.sliding_dot(prod, km.diff_squares, out);
            for (double& v : out) v *= inv_two_psi;
        }
    }
}

std::span<const double> PreaveragedPath::hat(int r, int s) const {
    return {hat_.data() + pair_index(r, s, d_) * len_, len_};
}

SpotEstimate spot_cov(const PreaveragedPath& path, std::size_t block_start, const TuningParams& tp, const SpotOptions& opts) {
    require_resolved(tp);
    const auto k = static_cast<std::size_t>(tp.k_n);
    const auto l = static_cast<std::size_t>(tp.l_n);
    if (block_start + k >= path.sample_count()) {
        throw RangeError("spot_cov: block [" + std::to_string(block_start) + ", " + std::to_string(block_start + k) +
                         "] overruns the sample (n = " + std::to_string(path.sample_count()) + ")");
    }
    std::vector<unsigned char> mask;
    return block_estimate(path, block_start, k - l + 1, k - l, tp, opts, mask);
}

SpotEstimate spot_cov(const ObservationSet& obs, std::size_t block_start, const TuningParams& tp, const KernelMoments& km,
                      const SpotOptions& opts) {
    require_resolved(tp);
    const auto k = static_cast<std::size_t>(tp.k_n);
    if (km.l_n != tp.l_n) throw ConfigError("spot_cov: kernel moments built for l_n = " + std::to_string(km.l_n));
    if (block_start + k >= obs.size()) {
        throw RangeError("spot_cov: block [" + std::to_string(block_start) + ", " + std::to_string(block_start + k) +
                         "] overruns the sample (n = " + std::to_string(obs.size()) + ")");
    }
    // Only rows block_start..block_start+k enter the estimate.
    const int d = obs.dimension();
    std::vector<double> sub(static_cast<std::size_t>(d) * (k + 1));
    for (int r = 0; r < d; ++r) {
        const auto y = obs.component(r).subspan(block_start, k + 1);
        std::copy(y.begin(), y.end(), sub.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(r) * (k + 1)));
    }
    const ObservationSet window(RegularGrid{obs.grid().delta_n, k + 1}, d, std::move(sub));
    return spot_cov(PreaveragedPath(window, km), 0, tp, opts);
}

Eigen::MatrixXd spot_noise(const ObservationSet& obs, std::size_t block_start, const TuningParams& tp) {
    const auto m = static_cast<std::size_t>(tp.m_n);
    if (block_start + m >= obs.size()) {
        throw RangeError("spot_noise: window [" + std::to_string(block_start) + ", " + std::to_string(block_start + m) +
                         "] overruns the sample (n = " + std::to_string(obs.size()) + ")");
    }
    const int d = obs.dimension();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd dy(d);
    for (std::size_t h = 1; h <= m; ++h) {
        for (int r = 0; r < d; ++r) dy[r] = obs.at(block_start + h, r) - obs.at(block_start + h - 1, r);
        out.noalias() += dy * dy.transpose();
    }
    return (out + out.transpose()) / (4.0 * static_cast<double>(m));
}

SpotSeries spot_series(const ObservationSet& obs, const TuningParams& tp, const KernelMoments& km, const SpotOptions& opts) {
    require_resolved(tp);
    if (km.l_n != tp.l_n) throw ConfigError("spot_series: kernel moments built for l_n = " + std::to_string(km.l_n));
    const std::size_t n = obs.size();
    const auto k = static_cast<std::size_t>(tp.k_n);
    const auto l = static_cast<std::size_t>(tp.l_n);
    if (n < k + l) {
        throw InsufficientDataError("spot_series: need n >= k_n + l_n = " + std::to_string(k + l) + ", got n = " +
                                    std::to_string(n));
    }
    const PreaveragedPath path(obs, km);
    const std::size_t full = k - l + 1;

    SpotSeries out;
    std::vector<std::size_t> starts;
    if (opts.overlapping) {
        out.stride = 1;
        for (std::size_t i = 0; i + k < n; ++i) starts.push_back(i);
    } else {
        out.stride = k;
        for (std::size_t b = 0; b < n / k; ++b) starts.push_back(b * k);
    }

    std::vector<unsigned char> mask;
    out.block_indices.reserve(starts.size());
    for (std::size_t i : starts) {
        const std::size_t count = std::min(full, path.last_index() - i);
        if (count < 2) throw InsufficientDataError("spot_series: block at " + std::to_string(i) + " has no summands");
        SpotEstimate est = block_estimate(path, i, count, count - 1, tp, opts, mask);
        bool projected = false;
        if (opts.psd_projection) {
            auto p = psd_project(est.c);
            est.c = std::move(p.matrix);
            projected = p.projected;
        }
        out.block_indices.push_back(i);
        out.c_hat.push_back(std::move(est.c));
        out.gamma_hat.push_back(spot_noise(obs, i, tp));
        out.truncated_fraction.push_back(est.truncated_fraction);
        out.psd_projected.push_back(projected);
    }
    return out;
}

}  // namespace hfvol
