#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hfvol {

/// Kernel-derived constants that enter the bias correction and the
/// asymptotic covariance. Subscript 0 refers to the kernel itself, 1 to its
/// derivative.
struct ContinuousMoments {
    double phi0_at_0 = 0.0;
    double phi1_at_0 = 0.0;
    double Phi_00 = 0.0;
    double Phi_01 = 0.0;
    double Phi_11 = 0.0;
    double Psi_00 = 0.0;
    double Psi_01 = 0.0;
    double Psi_11 = 0.0;
};

/// Smoothing kernel on [0,1] used for local moving averages.
///
/// `derivative` and `breakpoints` are optional. When the derivative is absent
/// a central difference is used. Breakpoints are interior points where the
/// derivative jumps; quadrature splits there.
struct Kernel {
    std::string description;
    std::function<double(double)> evaluate;
    std::function<double(double)> derivative;
    std::vector<double> breakpoints;
    std::optional<ContinuousMoments> closed_form;
};

/// phi(s) = min(s, 1 - s).
Kernel default_kernel();

/// "triangular" (the default), "quadratic" (4 s (1 - s)), "sine" (sin(pi s)).
Kernel kernel_by_name(std::string_view name);

std::vector<std::string> kernel_names();

/// Checks the support and smoothness conditions numerically; throws
/// ConfigError with the violated condition.
void check_kernel(const Kernel& kernel);

/// Discrete weights and continuous constants for one window length.
struct KernelMoments {
    int l_n = 0;
    std::vector<double> weights;       // phi(h / l_n), h = 1..l_n-1
    std::vector<double> diff_squares;  // (phi_{h+1} - phi_h)^2, h = 0..l_n-1
    double psi_n = 0.0;
    ContinuousMoments constants;
};

/// Fills the discrete part (weights, diff_squares, psi_n). Throws ConfigError
/// when l_n < 2.
KernelMoments discrete_weights(const Kernel& kernel, int l_n);

/// Quadrature of the continuous constants. Throws NumericalError if halving
/// the panel count changes any constant by more than 1e-10.
ContinuousMoments continuous_moments(const Kernel& kernel, int quadrature_panels = 1024);

/// Autocorrelation phi_0(s) (which = 0) or phi_1(s) (which = 1).
double kernel_autocorrelation(const Kernel& kernel, int which, double s, int quadrature_panels = 1024);

/// Closed form when the kernel has one, quadrature otherwise.
ContinuousMoments moments_for(const Kernel& kernel, int quadrature_panels = 1024);

/// Discrete weights for l_n combined with moments_for(kernel).
KernelMoments make_kernel_moments(const Kernel& kernel, int l_n, int quadrature_panels = 1024);

}  // namespace hfvol
