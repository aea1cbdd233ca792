#include <cmath>

#include "hfvol/simd.hpp"

namespace hfvol::simd {
namespace {

void sliding_dot(std::span<const double> x, std::span<const double> w, std::span<double> out) {
    const std::size_t m = w.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (std::size_t h = 0; h < m; ++h) acc += x[i + h] * w[h];
        out[i] = acc;
    }
}

double dot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
    return acc;
}

double masked_dot(std::span<const double> x, std::span<const double> y, std::span<const unsigned char> mask) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (mask[i]) acc += x[i] * y[i];
    }
    return acc;
}

TruncatedSum truncated_square_sum(std::span<const double> x, double limit) {
    TruncatedSum r;
    for (double v : x) {
        if (std::abs(v) <= limit) {
            r.sum += v * v;
            ++r.kept;
        }
    }
    return r;
}

double sum(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v;
    return acc;
}

}  // namespace

const Kernels& scalar() {
    static const Kernels k{"scalar", sliding_dot, dot, masked_dot, truncated_square_sum, sum};
    return k;
}

}  // namespace hfvol::simd
