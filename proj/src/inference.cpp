#include "hfvol/inference.hpp"

#include <cmath>

#include "hfvol/errors.hpp"
#include "hfvol/tensor.hpp"

namespace hfvol {
namespace {

struct BlockTerms {
    Eigen::VectorXd value;
    Eigen::VectorXd bias;
    Eigen::MatrixXd avar;  // grad grad^T : Xi for this block
    bool repaired = false;
};

BlockTerms block_terms(const Eigen::MatrixXd& c_hat, const Eigen::MatrixXd& gamma_hat, const Functional& f,
                       const TuningParams& tp, const KernelMoments& km, bool want_avar) {
    BlockTerms out;
    Eigen::MatrixXd c = c_hat;
    if (f.guard && f.guard(c)) {
        c = f.repair(c);
        out.repaired = true;
    }
    const Tensor4 xi = xi_tensor(c, gamma_hat, tp.theta_effective(), km.constants);
    out.value = f.value(c);
    const auto hess = f.hessian(c);
    const int r = f.output_dim;
    out.bias.resize(r);
    const double scale = 1.0 / (2.0 * static_cast<double>(tp.k_n) * std::sqrt(tp.delta_n));
    for (int a = 0; a < r; ++a) out.bias[a] = scale * contract(hess[static_cast<std::size_t>(a)], xi);
    if (want_avar) {
        const auto grad = f.gradient(c);
        out.avar.resize(r, r);
        for (int a = 0; a < r; ++a)
            for (int b = a; b < r; ++b) {
                const double v = contract(grad[static_cast<std::size_t>(a)], xi, grad[static_cast<std::size_t>(b)]);
                out.avar(a, b) = v;
                out.avar(b, a) = v;
            }
    }
    return out;
}

}  // namespace

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("normal_quantile: p must lie in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double low = 0.02425;
    double x;
    if (p < low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against erfc brings the error to machine level.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

Eigen::VectorXd bias_term(const Eigen::MatrixXd& c_hat, const Eigen::MatrixXd& gamma_hat, const Functional& f,
                          const TuningParams& tp, const KernelMoments& km) {
    f.check(c_hat);
    return block_terms(c_hat, gamma_hat, f, tp, km, false).bias;
}

Eigen::MatrixXd avar(const SpotSeries& spot, const Functional& f, const TuningParams& tp, const KernelMoments& km) {
    if (spot.size() == 0) throw InsufficientDataError("avar: empty spot series");
    const int r = f.output_dim;
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(r, r);
    for (std::size_t b = 0; b < spot.size(); ++b) {
        v += block_terms(spot.c_hat[b], spot.gamma_hat[b], f, tp, km, true).avar;
    }
    v *= static_cast<double>(spot.stride) * tp.delta_n;
    return 0.5 * (v + v.transpose());
}

std::vector<std::pair<double, double>> confidence_interval(const Eigen::VectorXd& s_hat, const Eigen::MatrixXd& v_hat,
                                                           double delta_n, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
    const double z = normal_quantile(0.5 * (1.0 + level));
    std::vector<std::pair<double, double>> out;
    for (Eigen::Index i = 0; i < s_hat.size(); ++i) {
        const double v = v_hat(i, i);
        if (v < 0.0 || !std::isfinite(v)) {
            throw NumericalError("confidence_interval: asymptotic variance entry " + std::to_string(i) + " is " +
                                 std::to_string(v));
        }
        const double half = z * std::sqrt(std::sqrt(delta_n) * v);
        out.emplace_back(s_hat[i] - half, s_hat[i] + half);
    }
    return out;
}

EstimateReport estimate_from_spot(const SpotSeries& spot, std::size_t n, const Functional& f, const TuningParams& tp,
                                  const KernelMoments& km, const EstimateOptions& opts) {
    if (spot.size() == 0) throw InsufficientDataError("estimate: no complete block fits the sample");
    const int r = f.output_dim;
    EstimateReport rep;
    rep.functional = f.name;
    rep.delta_n = tp.delta_n;
    rep.t = static_cast<double>(n) * tp.delta_n;
    rep.level = opts.level;
    rep.tuning = tp;

    Eigen::VectorXd sum_g = Eigen::VectorXd::Zero(r);
    Eigen::VectorXd sum_b = Eigen::VectorXd::Zero(r);
    Eigen::MatrixXd sum_v = Eigen::MatrixXd::Zero(r, r);
    double trunc = 0.0;
    for (std::size_t b = 0; b < spot.size(); ++b) {
        const BlockTerms bt = block_terms(spot.c_hat[b], spot.gamma_hat[b], f, tp, km, true);
        sum_g += bt.value;
        sum_b += bt.bias;
        sum_v += bt.avar;
        trunc += spot.truncated_fraction[b];
        if (bt.repaired) ++rep.diagnostics.guard_violations;
        if (spot.psd_projected[b]) ++rep.diagnostics.psd_projected;
    }
    rep.diagnostics.blocks = spot.size();
    rep.diagnostics.mean_truncated_fraction = trunc / static_cast<double>(spot.size());
    if (rep.diagnostics.guard_violations == spot.size()) {
        throw GuardError(f.name + ": every block estimate violates the functional's domain guard");
    }

    const double weight = static_cast<double>(spot.stride) * tp.delta_n;
    rep.a_n_t = rep.t / (static_cast<double>(spot.size()) * weight);
    rep.S_hat_raw = weight * rep.a_n_t * sum_g;
    rep.bias_total = weight * rep.a_n_t * sum_b;
    rep.S_hat = weight * rep.a_n_t * (sum_g - sum_b);
    rep.V_hat = weight * sum_v;
    rep.V_hat = 0.5 * (rep.V_hat + rep.V_hat.transpose());
    rep.ci = confidence_interval(rep.S_hat, rep.V_hat, tp.delta_n, opts.level);
    rep.std_error.resize(r);
    for (int a = 0; a < r; ++a) rep.std_error[a] = std::sqrt(std::sqrt(tp.delta_n) * rep.V_hat(a, a));
    return rep;
}

EstimateReport estimate(const ObservationSet& obs, const Functional& f, const TuningParams& tp, const KernelMoments& km,
                        const EstimateOptions& opts) {
    const TuningParams resolved = resolve_truncation(tp, obs, km);
    const SpotSeries spot = spot_series(obs, resolved, km, opts.spot);
    return estimate_from_spot(spot, obs.size(), f, resolved, km, opts);
}

}  // namespace hfvol
