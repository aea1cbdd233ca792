#include "hfvol/kernel_moments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <type_traits>

#include "hfvol/errors.hpp"

namespace hfvol {
namespace {

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> kGaussNodes = {
    -0.9061798459386639927976269, -0.5384693101056830910363144, 0.0,
    0.5384693101056830910363144, 0.9061798459386639927976269};
constexpr std::array<double, 5> kGaussWeights = {
    0.2369268850561890875142640, 0.4786286704993664680412915, 0.5688888888888888888888889,
    0.4786286704993664680412915, 0.2369268850561890875142640};

/// Integrates f over [a, b] with composite Gauss-Legendre, splitting at the
/// given cut points and giving each piece a share of `panels` proportional
/// to its length. T is double or a fixed-size std::array<double, N>.
template <class T, class F>
T integrate_pieces(F&& f, double a, double b, std::vector<double> cuts, int panels) {
    T total{};
    if (b <= a) return total;
    cuts.push_back(a);
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double prev = a;
    for (double cut : cuts) {
        if (cut <= prev) continue;
        if (cut > b) break;
        const double len = cut - prev;
        const int m = std::max(1, static_cast<int>(std::ceil(len / (b - a) * panels)));
        const double h = len / m;
        for (int p = 0; p < m; ++p) {
            const double mid = prev + (p + 0.5) * h;
            for (std::size_t q = 0; q < kGaussNodes.size(); ++q) {
                const double w = 0.5 * h * kGaussWeights[q];
                const T v = f(mid + 0.5 * h * kGaussNodes[q]);
                if constexpr (std::is_same_v<T, double>) {
                    total += w * v;
                } else {
                    for (std::size_t i = 0; i < total.size(); ++i) total[i] += w * v[i];
                }
            }
        }
        prev = cut;
    }
    return total;
}

std::function<double(double)> derivative_of(const Kernel& kernel, int panels) {
    if (kernel.derivative) return kernel.derivative;
    const double step = 1.0 / (8.0 * panels);
    auto phi = kernel.evaluate;
    return [phi, step](double s) { return (phi(s + step) - phi(s - step)) / (2.0 * step); };
}

std::function<double(double)> supported(std::function<double(double)> f) {
    return [f = std::move(f)](double s) { return (s <= 0.0 || s >= 1.0) ? 0.0 : f(s); };
}

double autocorrelation(const std::function<double(double)>& f, const std::vector<double>& breaks,
                       double s, int panels) {
    if (s >= 1.0) return 0.0;
    std::vector<double> cuts;
    for (double b : breaks) {
        cuts.push_back(b);
        cuts.push_back(b + s);
    }
    return integrate_pieces<double>([&](double u) { return f(u) * f(u - s); }, s, 1.0, cuts, panels);
}

ContinuousMoments quadrature(const Kernel& kernel, int panels) {
    const auto f0 = supported(kernel.evaluate);
    const auto f1 = supported(derivative_of(kernel, panels));
    const auto& bp = kernel.breakpoints;

    std::vector<double> outer_cuts;
    for (double b : bp) {
        outer_cuts.push_back(b);
        outer_cuts.push_back(1.0 - b);
        for (double c : bp) {
            if (b > c) outer_cuts.push_back(b - c);
        }
    }

    // The inner integrand is smooth between the cuts, so 5-point panels
    // converge far faster there than in the outer variable.
    const int inner = std::max(64, panels / 8);
    ContinuousMoments m;
    m.phi0_at_0 = autocorrelation(f0, bp, 0.0, panels);
    m.phi1_at_0 = autocorrelation(f1, bp, 0.0, panels);
    using Six = std::array<double, 6>;
    const Six r = integrate_pieces<Six>(
        [&](double s) {
            const double a = autocorrelation(f0, bp, s, inner);
            const double b = autocorrelation(f1, bp, s, inner);
            return Six{a * a, a * b, b * b, s * a * a, s * a * b, s * b * b};
        },
        0.0, 1.0, outer_cuts, panels);
    m.Phi_00 = r[0];
    m.Phi_01 = r[1];
    m.Phi_11 = r[2];
    m.Psi_00 = r[3];
    m.Psi_01 = r[4];
    m.Psi_11 = r[5];
    return m;
}

std::array<double, 8> as_array(const ContinuousMoments& m) {
    return {m.phi0_at_0, m.phi1_at_0, m.Phi_00, m.Phi_01, m.Phi_11, m.Psi_00, m.Psi_01, m.Psi_11};
}

}  // namespace

Kernel default_kernel() {
    Kernel k;
    k.description = "triangular";
    k.evaluate = [](double s) { return (s <= 0.0 || s >= 1.0) ? 0.0 : std::min(s, 1.0 - s); };
    k.derivative = [](double s) {
        if (s <= 0.0 || s >= 1.0) return 0.0;
        return s < 0.5 ? 1.0 : -1.0;
    };
    k.breakpoints = {0.5};
    ContinuousMoments cf;
    cf.phi0_at_0 = 1.0 / 12.0;
    cf.phi1_at_0 = 1.0;
    cf.Phi_00 = 151.0 / 80640.0;
    cf.Phi_01 = 1.0 / 96.0;
    cf.Phi_11 = 1.0 / 6.0;
    cf.Psi_00 = 103.0 / 322560.0;
    cf.Psi_01 = 1.0 / 5760.0;
    cf.Psi_11 = 1.0 / 24.0;
    k.closed_form = cf;
    return k;
}

Kernel kernel_by_name(std::string_view name) {
    if (name == "triangular" || name == "default") return default_kernel();
    if (name == "quadratic") {
        Kernel k;
        k.description = "quadratic";
        k.evaluate = [](double s) { return (s <= 0.0 || s >= 1.0) ? 0.0 : 4.0 * s * (1.0 - s); };
        k.derivative = [](double s) { return (s <= 0.0 || s >= 1.0) ? 0.0 : 4.0 - 8.0 * s; };
        return k;
    }
    if (name == "sine") {
        Kernel k;
        k.description = "sine";
        k.evaluate = [](double s) { return (s <= 0.0 || s >= 1.0) ? 0.0 : std::sin(std::numbers::pi * s); };
        k.derivative = [](double s) {
            return (s <= 0.0 || s >= 1.0) ? 0.0 : std::numbers::pi * std::cos(std::numbers::pi * s);
        };
        return k;
    }
    throw ConfigError("unknown kernel '" + std::string(name) + "' (expected triangular, quadratic or sine)");
}

std::vector<std::string> kernel_names() { return {"triangular", "quadratic", "sine"}; }

void check_kernel(const Kernel& kernel) {
    if (!kernel.evaluate) throw ConfigError("kernel '" + kernel.description + "' has no evaluate function");
    if (std::abs(kernel.evaluate(0.0)) > 1e-12 || std::abs(kernel.evaluate(1.0)) > 1e-12) {
        throw ConfigError("kernel '" + kernel.description + "' must vanish at 0 and 1");
    }
    constexpr int grid = 4096;
    double sq = 0.0;
    double max_quotient = 0.0;
    double prev = kernel.evaluate(0.0);
    for (int i = 1; i <= grid; ++i) {
        const double s = static_cast<double>(i) / grid;
        const double v = kernel.evaluate(s);
        if (!std::isfinite(v)) throw ConfigError("kernel '" + kernel.description + "' is not finite on [0,1]");
        sq += v * v / grid;
        max_quotient = std::max(max_quotient, std::abs(v - prev) * grid);
        prev = v;
    }
    if (sq <= 0.0) throw ConfigError("kernel '" + kernel.description + "' has zero L2 norm");
    // A continuous piecewise-C1 kernel has bounded difference quotients; a
    // jump shows up as a quotient of order `grid`.
    if (max_quotient > 0.1 * grid) {
        throw ConfigError("kernel '" + kernel.description + "' is not continuous (difference quotient " +
                          std::to_string(max_quotient) + ")");
    }
}

KernelMoments discrete_weights(const Kernel& kernel, int l_n) {
    if (l_n < 2) throw ConfigError("invalid window: l_n = " + std::to_string(l_n) + " < 2");
    KernelMoments km;
    km.l_n = l_n;
    km.weights.resize(static_cast<std::size_t>(l_n - 1));
    for (int h = 1; h < l_n; ++h) {
        km.weights[static_cast<std::size_t>(h - 1)] = kernel.evaluate(static_cast<double>(h) / l_n);
    }
    km.diff_squares.resize(static_cast<std::size_t>(l_n));
    for (int h = 0; h < l_n; ++h) {
        const double lo = h == 0 ? 0.0 : km.weights[static_cast<std::size_t>(h - 1)];
        const double hi = h + 1 == l_n ? 0.0 : km.weights[static_cast<std::size_t>(h)];
        km.diff_squares[static_cast<std::size_t>(h)] = (hi - lo) * (hi - lo);
    }
    double psi = 0.0;
    for (double w : km.weights) psi += w * w;
    if (!(psi > 0.0)) throw ConfigError("kernel '" + kernel.description + "' gives psi_n = 0 for l_n = " + std::to_string(l_n));
    km.psi_n = psi;
    return km;
}

ContinuousMoments continuous_moments(const Kernel& kernel, int quadrature_panels) {
    if (quadrature_panels < 1000) {
        throw ConfigError("quadrature_panels must be >= 1000, got " + std::to_string(quadrature_panels));
    }
    const ContinuousMoments fine = quadrature(kernel, quadrature_panels);
    const ContinuousMoments coarse = quadrature(kernel, quadrature_panels / 2);
    const auto a = as_array(fine);
    const auto b = as_array(coarse);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i]) || std::abs(a[i] - b[i]) > 1e-10) {
            throw NumericalError("kernel '" + kernel.description + "': quadrature did not converge (refinement changed a constant by " +
                                 std::to_string(std::abs(a[i] - b[i])) + ")");
        }
    }
    return fine;
}

double kernel_autocorrelation(const Kernel& kernel, int which, double s, int quadrature_panels) {
    const auto f = which == 0 ? supported(kernel.evaluate) : supported(derivative_of(kernel, quadrature_panels));
    return autocorrelation(f, kernel.breakpoints, s, quadrature_panels);
}

ContinuousMoments moments_for(const Kernel& kernel, int quadrature_panels) {
    if (kernel.closed_form) return *kernel.closed_form;
    return continuous_moments(kernel, quadrature_panels);
}

KernelMoments make_kernel_moments(const Kernel& kernel, int l_n, int quadrature_panels) {
    KernelMoments km = discrete_weights(kernel, l_n);
    km.constants = moments_for(kernel, quadrature_panels);
    return km;
}

}  // namespace hfvol
