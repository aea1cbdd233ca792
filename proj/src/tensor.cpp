#include "hfvol/tensor.hpp"

#include "hfvol/errors.hpp"

namespace hfvol {

Tensor4& Tensor4::operator+=(const Tensor4& o) {
    if (o.d_ != d_) throw Error("Tensor4: dimension mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Tensor4& Tensor4::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
Tensor4 operator*(double s, Tensor4 a) { return a *= s; }

Tensor4 sigma_tensor(const Eigen::MatrixXd& x) {
    const int d = static_cast<int>(x.rows());
    Tensor4 t(d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                for (int m = 0; m < d; ++m) t(j, k, l, m) = x(j, l) * x(k, m) + x(j, m) * x(k, l);
    return t;
}

Tensor4 theta_tensor(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z) {
    const int d = static_cast<int>(x.rows());
    if (z.rows() != d) throw Error("theta_tensor: dimension mismatch");
    Tensor4 t(d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                for (int m = 0; m < d; ++m)
                    t(j, k, l, m) = x(j, l) * z(k, m) + x(j, m) * z(k, l) + x(k, m) * z(j, l) + x(k, l) * z(j, m);
    return t;
}

Tensor4 xi_tensor(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, double theta, const ContinuousMoments& cm) {
    if (!(theta > 0.0)) throw ConfigError("xi_tensor: theta must be > 0");
    const double pre = 2.0 * theta / (cm.phi0_at_0 * cm.phi0_at_0);
    const double t2 = theta * theta;
    const double a = pre * cm.Phi_00;
    const double b = pre * cm.Phi_01 / t2;
    const double c = pre * cm.Phi_11 / (t2 * t2);
    const int d = static_cast<int>(x.rows());
    Tensor4 t(d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                for (int m = 0; m < d; ++m) {
                    const double sx = x(j, l) * x(k, m) + x(j, m) * x(k, l);
                    const double sz = z(j, l) * z(k, m) + z(j, m) * z(k, l);
                    const double th = x(j, l) * z(k, m) + x(j, m) * z(k, l) + x(k, m) * z(j, l) + x(k, l) * z(j, m);
                    t(j, k, l, m) = a * sx + b * th + c * sz;
                }
    return t;
}

double contract(const Eigen::MatrixXd& a, const Tensor4& t, const Eigen::MatrixXd& b) {
    const int d = t.dimension();
    double acc = 0.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            if (a(j, k) == 0.0) continue;
            double inner = 0.0;
            for (int l = 0; l < d; ++l)
                for (int m = 0; m < d; ++m) inner += t(j, k, l, m) * b(l, m);
            acc += a(j, k) * inner;
        }
    return acc;
}

double contract(const Tensor4& a, const Tensor4& b) {
    if (a.dimension() != b.dimension()) throw Error("contract: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) acc += a.data()[i] * b.data()[i];
    return acc;
}

}  // namespace hfvol
