#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "hfvol/kernel_moments.hpp"

namespace hfvol {

/// Dense rank-4 array indexed (jk, lm), d^4 entries.
class Tensor4 {
public:
    Tensor4() = default;
    explicit Tensor4(int d) : d_(d), data_(static_cast<std::size_t>(d) * d * d * d, 0.0) {}

    int dimension() const { return d_; }
    double& operator()(int j, int k, int l, int m) { return data_[index(j, k, l, m)]; }
    double operator()(int j, int k, int l, int m) const { return data_[index(j, k, l, m)]; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Tensor4& operator+=(const Tensor4& o);
    Tensor4& operator*=(double s);

private:
    std::size_t index(int j, int k, int l, int m) const {
        const std::size_t d = static_cast<std::size_t>(d_);
        return ((static_cast<std::size_t>(j) * d + k) * d + l) * d + m;
    }
    int d_ = 0;
    std::vector<double> data_;
};

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator*(double s, Tensor4 a);

/// x^{jl} x^{km} + x^{jm} x^{kl}
Tensor4 sigma_tensor(const Eigen::MatrixXd& x);

/// x^{jl} z^{km} + x^{jm} z^{kl} + x^{km} z^{jl} + x^{kl} z^{jm}
Tensor4 theta_tensor(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z);

/// Asymptotic covariance kernel of the spot estimator:
/// (2 theta / phi0(0)^2) [Phi00 Sigma(x) + Phi01/theta^2 Theta(x,z) + Phi11/theta^4 Sigma(z)].
Tensor4 xi_tensor(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, double theta, const ContinuousMoments& cm);

/// sum_{jklm} A^{jk} T^{jk,lm} B^{lm}
double contract(const Eigen::MatrixXd& a, const Tensor4& t, const Eigen::MatrixXd& b);
/// sum_{jklm} A^{jk,lm} B^{jk,lm}
double contract(const Tensor4& a, const Tensor4& b);

}  // namespace hfvol
