#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hfvol/tensor.hpp"

namespace hfvol {

/// A smooth map g from d x d covariance matrices to R^r.
///
/// Derivatives are taken with respect to all d^2 entries of the symmetric
/// extension g((c + c^T) / 2), so gradients are symmetric matrices and
/// Hessians carry the (jk) <-> (kj), (lm) <-> (ml) and (jk) <-> (lm)
/// symmetries.
struct Functional {
    std::string name;
    int output_dim = 1;
    int dimension = 0;  // required d, 0 for any

    std::function<Eigen::VectorXd(const Eigen::MatrixXd&)> value;
    std::function<std::vector<Eigen::MatrixXd>(const Eigen::MatrixXd&)> gradient;
    std::function<std::vector<Tensor4>(const Eigen::MatrixXd&)> hessian;

    /// Empty when c lies in the admissible domain, otherwise the reason.
    std::function<std::optional<std::string>(const Eigen::MatrixXd&)> guard;
    /// Nearby admissible point used when a block estimate fails the guard.
    std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> repair;

    /// Throws GuardError when c is outside the domain (or of the wrong size).
    void check(const Eigen::MatrixXd& c) const;
};

/// Parameters addressable from configuration files.
struct FunctionalSpec {
    std::string name;
    std::vector<int> indices;  // entry/power_entry indices, eigen index (0-based)
    double w = 1.0;            // laplace frequency
    std::string label;         // optional display name
};

/// Registry: entry(j,k), power_entry(j,k,l,m), log_scalar, square_scalar,
/// laplace(w), regression_beta, eigenvalue(idx), eigenvector(idx).
/// d is the data dimension. Throws ConfigError on an unknown name or
/// invalid parameters.
Functional builtin(const FunctionalSpec& spec, int d);
std::vector<std::string> builtin_names();

Functional identity_functional();                 // c^{11}
Functional entry_functional(int j, int k, int d);
Functional power_entry(int j, int k, int l, int m, int d);
Functional log_scalar();
Functional square_scalar();
Functional laplace(double w);
Functional regression_beta(int d);
Functional eigenvalue(int idx, int d);  // idx 0 is the largest
Functional eigenvector(int idx, int d);

/// a f + b g; both must share the output and data dimensions.
Functional linear_combination(double a, const Functional& f, double b, const Functional& g);

struct FdReport {
    double gradient_error = 0.0;  // worst relative deviation
    double hessian_error = 0.0;
    double worst() const { return std::max(gradient_error, hessian_error); }
};

/// Central differences in each of the d^2 entries: the gradient from the
/// value, the Hessian from the analytic gradient. Deviations are relative to
/// the largest analytic entry of the respective object. Throws GuardError
/// when c is outside the domain.
FdReport fd_verify(const Functional& f, const Eigen::MatrixXd& c, double h);

}  // namespace hfvol
