#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace kernel_oracle {

// Independent oracle for the triangular kernel: the inner convolution is
// piecewise quadratic, so Simpson on each piece between the kinks is exact;
// the outer integral uses adaptive Simpson.
inline double simpson(const std::function<double(double)>& f, double a, double b) {
    return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

inline double adaptive(const std::function<double(double)>& f, double a, double b, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double left = simpson(f, a, m);
    const double right = simpson(f, m, b);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return adaptive(f, a, m, left, tol / 2, depth - 1) + adaptive(f, m, b, right, tol / 2, depth - 1);
}

inline double adaptive(const std::function<double(double)>& f, double a, double b) {
    return adaptive(f, a, b, simpson(f, a, b), 1e-15, 40);
}

inline double tri(double s) { return (s <= 0.0 || s >= 1.0) ? 0.0 : std::min(s, 1.0 - s); }
inline double tri_d(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return s < 0.5 ? 1.0 : -1.0;
}

inline double convolution(double (*f)(double), double s) {
    std::vector<double> cuts = {s};
    for (double c : {0.5, s + 0.5}) {
        if (c > s && c < 1.0) cuts.push_back(c);
    }
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        // evaluate strictly inside each piece to avoid the derivative jump
        const double a = cuts[i], b = cuts[i + 1];
        if (b - a < 1e-300) continue;
        const double e = (b - a) * 1e-12;
        auto g = [&](double u) { return f(u) * f(u - s); };
        acc += simpson(g, a + e, b - e) * (b - a) / (b - a - 2 * e);
    }
    return acc;
}

struct Oracle {
    double phi0, phi1, p00, p01, p11;
};

inline Oracle oracle() {
    Oracle o{};
    o.phi0 = convolution(tri, 0.0);
    o.phi1 = convolution(tri_d, 0.0);
    auto sq = [](double (*f)(double), double (*g)(double)) {
        auto h = [=](double s) { return convolution(f, s) * convolution(g, s); };
        return adaptive(h, 0.0, 0.5) + adaptive(h, 0.5, 1.0);
    };
    o.p00 = sq(tri, tri);
    o.p01 = sq(tri, tri_d);
    o.p11 = sq(tri_d, tri_d);
    return o;
}

}  // namespace kernel_oracle
