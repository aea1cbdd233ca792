#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "hfvol/rng.hpp"
#include "hfvol/sampling.hpp"
#include "hfvol/simulation.hpp"

namespace testing_support {

/// Gaussian random walk with covariance c * delta per step plus iid noise.
inline hfvol::ObservationSet brownian(std::size_t n, double delta, const Eigen::MatrixXd& c, std::uint64_t seed,
                                      double noise_sd = 0.0) {
    const int d = static_cast<int>(c.rows());
    const Eigen::MatrixXd chol = c.llt().matrixL();
    hfvol::RandomStream rs(seed, 0, 0);
    hfvol::RandomStream ns(seed, 0, 1);
    std::vector<double> v(static_cast<std::size_t>(d) * n);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd z(d);
    const double sq = std::sqrt(delta);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            for (int r = 0; r < d; ++r) z[r] = rs.normal();
            x += sq * (chol * z);
        }
        for (int r = 0; r < d; ++r) v[static_cast<std::size_t>(r) * n + i] = x[r] + noise_sd * ns.normal();
    }
    return hfvol::ObservationSet(hfvol::RegularGrid{delta, n}, d, std::move(v));
}

inline hfvol::ObservationSet brownian(std::size_t n, double delta, double c, std::uint64_t seed, double noise_sd = 0.0) {
    return brownian(n, delta, Eigen::MatrixXd::Constant(1, 1, c), seed, noise_sd);
}

/// Random symmetric PSD matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_psd(int d, hfvol::RandomStream& rs, double lo = 0.0, double hi = 1.0) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rs.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd q = qr.householderQ();
    Eigen::VectorXd lambda(d);
    for (int i = 0; i < d; ++i) lambda[i] = lo + (hi - lo) * rs.uniform();
    Eigen::MatrixXd m = q * lambda.asDiagonal() * q.transpose();
    return 0.5 * (m + m.transpose());
}

inline Eigen::MatrixXd random_symmetric(int d, hfvol::RandomStream& rs) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rs.normal();
    return 0.5 * (a + a.transpose());
}

}  // namespace testing_support
