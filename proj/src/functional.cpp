#include "hfvol/functional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hfvol/errors.hpp"

namespace hfvol {
namespace {

Eigen::MatrixXd sym(const Eigen::MatrixXd& c) { return 0.5 * (c + c.transpose()); }

Eigen::MatrixXd unit(int d, int j, int k) {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(d, d);
    e(j, k) = 1.0;
    return e;
}

// Derivatives of g~(C) taken entrywise map to those of g~((C + C^T)/2) by
// averaging over the transposed index positions.
Tensor4 sym_hessian(const Tensor4& h) {
    const int d = h.dimension();
    Tensor4 out(d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            for (int l = 0; l < d; ++l)
                for (int m = 0; m < d; ++m)
                    out(j, k, l, m) = 0.25 * (h(j, k, l, m) + h(k, j, l, m) + h(j, k, m, l) + h(k, j, m, l));
    return out;
}

double trace_scale(const Eigen::MatrixXd& c) {
    const double t = c.trace() / static_cast<double>(c.rows());
    return std::isfinite(t) && t > 0.0 ? t : 0.0;
}

// c + s I with s = eps, 2 eps, 4 eps, ... until the guard passes.
std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> ridge_repair(
    std::function<std::optional<std::string>(const Eigen::MatrixXd&)> guard,
    std::function<double(const Eigen::MatrixXd&)> eps) {
    return [guard = std::move(guard), eps = std::move(eps)](const Eigen::MatrixXd& c) {
        const Eigen::MatrixXd s = sym(c);
        double shift = eps(s);
        if (!(shift > 0.0) || !std::isfinite(shift)) shift = 1e-12 * std::max(1.0, s.cwiseAbs().maxCoeff());
        const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(s.rows(), s.cols());
        for (int it = 0; it < 200; ++it, shift *= 2.0) {
            Eigen::MatrixXd candidate = s + shift * id;
            if (!guard(candidate)) return candidate;
        }
        throw GuardError("no admissible point found near the block estimate");
    };
}

struct SortedEigen {
    Eigen::VectorXd values;   // descending
    Eigen::MatrixXd vectors;  // columns match values
};

SortedEigen sorted_eigen(const Eigen::MatrixXd& c) {
    const int d = static_cast<int>(c.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym(c));
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    SortedEigen out{Eigen::VectorXd(d), Eigen::MatrixXd(d, d)};
    for (int q = 0; q < d; ++q) {
        out.values[q] = es.eigenvalues()[d - 1 - q];
        Eigen::VectorXd v = es.eigenvectors().col(d - 1 - q);
        double s = v.sum();
        if (std::abs(s) < 1e-12) {
            for (int i = 0; i < d; ++i) {
                if (std::abs(v[i]) > 1e-12) {
                    s = v[i];
                    break;
                }
            }
        }
        if (s < 0.0) v = -v;
        out.vectors.col(q) = v;
    }
    return out;
}

double gap_epsilon(const Eigen::MatrixXd& c) { return 1e-6 * trace_scale(c); }

std::optional<std::string> gap_guard(const Eigen::MatrixXd& c, int idx) {
    const SortedEigen e = sorted_eigen(c);
    const double eps = gap_epsilon(c);
    const int d = static_cast<int>(c.rows());
    double gap = std::numeric_limits<double>::infinity();
    if (idx > 0) gap = std::min(gap, e.values[idx - 1] - e.values[idx]);
    if (idx + 1 < d) gap = std::min(gap, e.values[idx] - e.values[idx + 1]);
    if (!(gap > eps)) {
        return "spectral gap " + std::to_string(gap) + " at eigenvalue " + std::to_string(idx) + " is not above " +
               std::to_string(eps);
    }
    return std::nullopt;
}

// Spreads the spectrum in its own eigenbasis so every adjacent gap is at least s.
std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)> gap_repair(int idx) {
    return [idx](const Eigen::MatrixXd& c) {
        const SortedEigen e = sorted_eigen(c);
        const int d = static_cast<int>(c.rows());
        double s = 2.0 * gap_epsilon(c);
        if (!(s > 0.0)) s = 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff());
        for (int it = 0; it < 200; ++it, s *= 2.0) {
            Eigen::VectorXd lambda = e.values;
            for (int q = 0; q < d; ++q) lambda[q] += s * static_cast<double>(d - 1 - q);
            Eigen::MatrixXd candidate = e.vectors * lambda.asDiagonal() * e.vectors.transpose();
            candidate = sym(candidate);
            if (!gap_guard(candidate, idx)) return candidate;
        }
        throw GuardError("no admissible point found near the block estimate");
    };
}

void require_index(int idx, int d, const char* what) {
    if (idx < 0 || idx >= d) {
        throw ConfigError(std::string(what) + ": index " + std::to_string(idx) + " outside [0, " + std::to_string(d) + ")");
    }
}

Functional first_entry_functional(std::string name, std::function<double(double)> f, std::function<double(double)> df,
                                  std::function<double(double)> d2f) {
    Functional g;
    g.name = std::move(name);
    g.value = [f](const Eigen::MatrixXd& c) { return Eigen::VectorXd::Constant(1, f(c(0, 0))); };
    g.gradient = [df](const Eigen::MatrixXd& c) {
        Eigen::MatrixXd gr = Eigen::MatrixXd::Zero(c.rows(), c.cols());
        gr(0, 0) = df(c(0, 0));
        return std::vector<Eigen::MatrixXd>{gr};
    };
    g.hessian = [d2f](const Eigen::MatrixXd& c) {
        Tensor4 h(static_cast<int>(c.rows()));
        h(0, 0, 0, 0) = d2f(c(0, 0));
        return std::vector<Tensor4>{h};
    };
    g.guard = [](const Eigen::MatrixXd&) -> std::optional<std::string> { return std::nullopt; };
    g.repair = [](const Eigen::MatrixXd& c) { return sym(c); };
    return g;
}

}  // namespace

void Functional::check(const Eigen::MatrixXd& c) const {
    if (c.rows() != c.cols()) throw GuardError(name + ": argument is not square");
    if (dimension != 0 && c.rows() != dimension) {
        throw GuardError(name + ": expects a " + std::to_string(dimension) + "x" + std::to_string(dimension) + " matrix");
    }
    if (!c.allFinite()) throw GuardError(name + ": argument has non-finite entries");
    if (guard) {
        if (auto why = guard(c)) throw GuardError(name + ": " + *why);
    }
}

Functional entry_functional(int j, int k, int d) {
    require_index(j, d, "entry");
    require_index(k, d, "entry");
    Functional g;
    g.name = "entry(" + std::to_string(j) + "," + std::to_string(k) + ")";
    g.dimension = d;
    g.value = [j, k](const Eigen::MatrixXd& c) { return Eigen::VectorXd::Constant(1, 0.5 * (c(j, k) + c(k, j))); };
    g.gradient = [j, k](const Eigen::MatrixXd& c) {
        const int n = static_cast<int>(c.rows());
        return std::vector<Eigen::MatrixXd>{sym(unit(n, j, k))};
    };
    g.hessian = [](const Eigen::MatrixXd& c) { return std::vector<Tensor4>{Tensor4(static_cast<int>(c.rows()))}; };
    g.guard = [](const Eigen::MatrixXd&) -> std::optional<std::string> { return std::nullopt; };
    g.repair = [](const Eigen::MatrixXd& c) { return sym(c); };
    return g;
}

Functional identity_functional() {
    Functional g = first_entry_functional(
        "identity", [](double x) { return x; }, [](double) { return 1.0; }, [](double) { return 0.0; });
    return g;
}

Functional power_entry(int j, int k, int l, int m, int d) {
    for (int i : {j, k, l, m}) require_index(i, d, "power_entry");
    Functional g;
    g.name = "power_entry(" + std::to_string(j) + "," + std::to_string(k) + "," + std::to_string(l) + "," +
             std::to_string(m) + ")";
    g.dimension = d;
    g.value = [=](const Eigen::MatrixXd& c) {
        const Eigen::MatrixXd s = sym(c);
        return Eigen::VectorXd::Constant(1, s(j, k) * s(l, m));
    };
    g.gradient = [=](const Eigen::MatrixXd& c) {
        const Eigen::MatrixXd s = sym(c);
        const int n = static_cast<int>(c.rows());
        return std::vector<Eigen::MatrixXd>{sym(unit(n, j, k) * s(l, m) + s(j, k) * unit(n, l, m))};
    };
    g.hessian = [=](const Eigen::MatrixXd& c) {
        Tensor4 h(static_cast<int>(c.rows()));
        h(j, k, l, m) += 1.0;
        h(l, m, j, k) += 1.0;
        return std::vector<Tensor4>{sym_hessian(h)};
    };
    g.guard = [](const Eigen::MatrixXd&) -> std::optional<std::string> { return std::nullopt; };
    g.repair = [](const Eigen::MatrixXd& c) { return sym(c); };
    return g;
}

Functional log_scalar() {
    Functional g = first_entry_functional(
        "log_scalar", [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; },
        [](double x) { return -1.0 / (x * x); });
    g.guard = [](const Eigen::MatrixXd& c) -> std::optional<std::string> {
        if (c(0, 0) > 0.0) return std::nullopt;
        return "log requires c11 > 0, got " + std::to_string(c(0, 0));
    };
    g.repair = ridge_repair(g.guard, [](const Eigen::MatrixXd& c) { return 1e-8 * trace_scale(c); });
    return g;
}

Functional square_scalar() {
    return first_entry_functional(
        "square_scalar", [](double x) { return x * x; }, [](double x) { return 2.0 * x; }, [](double) { return 2.0; });
}

Functional laplace(double w) {
    if (!std::isfinite(w)) throw ConfigError("laplace: frequency w must be finite");
    Functional g;
    g.name = "laplace(" + std::to_string(w) + ")";
    g.output_dim = 2;
    g.value = [w](const Eigen::MatrixXd& c) {
        Eigen::VectorXd v(2);
        v << std::cos(w * c(0, 0)), std::sin(w * c(0, 0));
        return v;
    };
    g.gradient = [w](const Eigen::MatrixXd& c) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(c.rows(), c.cols());
        Eigen::MatrixXd b = a;
        a(0, 0) = -w * std::sin(w * c(0, 0));
        b(0, 0) = w * std::cos(w * c(0, 0));
        return std::vector<Eigen::MatrixXd>{a, b};
    };
    g.hessian = [w](const Eigen::MatrixXd& c) {
        const int d = static_cast<int>(c.rows());
        Tensor4 a(d), b(d);
        a(0, 0, 0, 0) = -w * w * std::cos(w * c(0, 0));
        b(0, 0, 0, 0) = -w * w * std::sin(w * c(0, 0));
        return std::vector<Tensor4>{a, b};
    };
    g.guard = [](const Eigen::MatrixXd&) -> std::optional<std::string> { return std::nullopt; };
    g.repair = [](const Eigen::MatrixXd& c) { return sym(c); };
    return g;
}

Functional regression_beta(int d) {
    if (d < 2) throw ConfigError("regression_beta: needs d >= 2, got " + std::to_string(d));
    const int s = d - 1;  // regressors are the first d-1 coordinates, the response is the last
    Functional g;
    g.name = "regression_beta";
    g.output_dim = s;
    g.dimension = d;

    auto solve = [s](const Eigen::MatrixXd& c) {
        const Eigen::MatrixXd m = sym(c);
        const Eigen::MatrixXd inv = m.topLeftCorner(s, s).inverse();
        const Eigen::VectorXd beta = inv * m.col(s).head(s);
        return std::pair{inv, beta};
    };

    g.value = [solve](const Eigen::MatrixXd& c) { return solve(c).second; };
    g.gradient = [solve, s, d](const Eigen::MatrixXd& c) {
        const auto [inv, beta] = solve(c);
        std::vector<Eigen::MatrixXd> out;
        for (int a = 0; a < s; ++a) {
            Eigen::MatrixXd gr = Eigen::MatrixXd::Zero(d, d);
            for (int p = 0; p < s; ++p) {
                for (int q = 0; q < s; ++q) gr(p, q) = -inv(a, p) * beta[q];
                gr(p, s) = inv(a, p);
            }
            out.push_back(sym(gr));
        }
        return out;
    };
    g.hessian = [solve, s, d](const Eigen::MatrixXd& c) {
        const auto [inv, beta] = solve(c);
        std::vector<Tensor4> out;
        for (int a = 0; a < s; ++a) {
            Tensor4 h(d);
            for (int p = 0; p < s; ++p)
                for (int q = 0; q < s; ++q) {
                    for (int r = 0; r < s; ++r)
                        for (int t = 0; t < s; ++t) h(p, q, r, t) = inv(a, r) * inv(t, p) * beta[q] + inv(a, p) * inv(q, r) * beta[t];
                    for (int r = 0; r < s; ++r) {
                        h(p, q, r, s) = -inv(a, p) * inv(q, r);
                        h(r, s, p, q) = -inv(a, p) * inv(q, r);
                    }
                }
            out.push_back(sym_hessian(h));
        }
        return out;
    };
    g.guard = [s](const Eigen::MatrixXd& c) -> std::optional<std::string> {
        const Eigen::MatrixXd block = sym(c).topLeftCorner(s, s);
        const double eps = 1e-8 * block.trace() / static_cast<double>(s);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block, Eigen::EigenvaluesOnly);
        const double lmin = es.eigenvalues().minCoeff();
        if (eps > 0.0 && lmin > eps) return std::nullopt;
        return "regressor covariance is near-singular (min eigenvalue " + std::to_string(lmin) + ", bound " +
               std::to_string(eps) + ")";
    };
    g.repair = ridge_repair(g.guard, [s](const Eigen::MatrixXd& c) {
        return 1e-8 * std::max(0.0, c.topLeftCorner(s, s).trace()) / static_cast<double>(s);
    });
    return g;
}

Functional eigenvalue(int idx, int d) {
    require_index(idx, d, "eigenvalue");
    Functional g;
    g.name = "eigenvalue(" + std::to_string(idx) + ")";
    g.dimension = d;
    g.value = [idx](const Eigen::MatrixXd& c) { return Eigen::VectorXd::Constant(1, sorted_eigen(c).values[idx]); };
    g.gradient = [idx](const Eigen::MatrixXd& c) {
        const Eigen::VectorXd v = sorted_eigen(c).vectors.col(idx);
        return std::vector<Eigen::MatrixXd>{v * v.transpose()};
    };
    g.hessian = [idx, d](const Eigen::MatrixXd& c) {
        const SortedEigen e = sorted_eigen(c);
        const Eigen::VectorXd vp = e.vectors.col(idx);
        Tensor4 h(d);
        for (int q = 0; q < d; ++q) {
            if (q == idx) continue;
            const Eigen::VectorXd vq = e.vectors.col(q);
            const Eigen::MatrixXd sq = 0.5 * (vp * vq.transpose() + vq * vp.transpose());
            const double w = 2.0 / (e.values[idx] - e.values[q]);
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    for (int l = 0; l < d; ++l)
                        for (int m = 0; m < d; ++m) h(j, k, l, m) += w * sq(j, k) * sq(l, m);
        }
        return std::vector<Tensor4>{h};
    };
    g.guard = [idx](const Eigen::MatrixXd& c) { return gap_guard(c, idx); };
    g.repair = gap_repair(idx);
    return g;
}

Functional eigenvector(int idx, int d) {
    require_index(idx, d, "eigenvector");
    Functional g;
    g.name = "eigenvector(" + std::to_string(idx) + ")";
    g.dimension = d;
    g.output_dim = d;
    g.value = [idx](const Eigen::MatrixXd& c) { return Eigen::VectorXd(sorted_eigen(c).vectors.col(idx)); };
    g.gradient = [idx, d](const Eigen::MatrixXd& c) {
        const SortedEigen e = sorted_eigen(c);
        const Eigen::VectorXd vp = e.vectors.col(idx);
        std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(d), Eigen::MatrixXd::Zero(d, d));
        for (int q = 0; q < d; ++q) {
            if (q == idx) continue;
            const Eigen::VectorXd vq = e.vectors.col(q);
            const Eigen::MatrixXd sq = 0.5 * (vq * vp.transpose() + vp * vq.transpose());
            const double w = 1.0 / (e.values[idx] - e.values[q]);
            for (int i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] += w * vq[i] * sq;
        }
        return out;
    };
    g.hessian = [idx, d](const Eigen::MatrixXd& c) {
        const SortedEigen e = sorted_eigen(c);
        const int p = idx;
        // Projections v_a^T sym(E_jk) v_b for every unit direction.
        std::vector<Eigen::MatrixXd> proj(static_cast<std::size_t>(d * d));
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                const Eigen::MatrixXd u = sym(unit(d, j, k));
                proj[static_cast<std::size_t>(j * d + k)] = e.vectors.transpose() * u * e.vectors;
            }
        Eigen::VectorXd inv_gap = Eigen::VectorXd::Zero(d);
        for (int q = 0; q < d; ++q) {
            if (q != p) inv_gap[q] = 1.0 / (e.values[p] - e.values[q]);
        }
        std::vector<Tensor4> out(static_cast<std::size_t>(d), Tensor4(d));
        Eigen::VectorXd coef(d);
        for (int jk = 0; jk < d * d; ++jk) {
            const Eigen::MatrixXd& E = proj[static_cast<std::size_t>(jk)];
            for (int lm = 0; lm < d * d; ++lm) {
                const Eigen::MatrixXd& F = proj[static_cast<std::size_t>(lm)];
                // Second-order correction, polarized: coefficient on each v_q.
                coef.setZero();
                double self = 0.0;
                for (int q = 0; q < d; ++q) {
                    if (q == p) continue;
                    double acc = 0.0;
                    for (int r = 0; r < d; ++r) {
                        if (r == p) continue;
                        acc += (E(q, r) * F(r, p) + F(q, r) * E(r, p)) * inv_gap[r];
                    }
                    acc -= (E(p, p) * F(q, p) + F(p, p) * E(q, p)) * inv_gap[q];
                    coef[q] = acc * inv_gap[q];
                    self -= E(q, p) * F(q, p) * inv_gap[q] * inv_gap[q];
                }
                coef[p] = self;
                const Eigen::VectorXd dv = e.vectors * coef;
                for (int i = 0; i < d; ++i) {
                    out[static_cast<std::size_t>(i)](jk / d, jk % d, lm / d, lm % d) = dv[i];
                }
            }
        }
        return out;
    };
    g.guard = [idx](const Eigen::MatrixXd& c) { return gap_guard(c, idx); };
    g.repair = gap_repair(idx);
    return g;
}

Functional linear_combination(double a, const Functional& f, double b, const Functional& g) {
    if (f.output_dim != g.output_dim) throw ConfigError("linear_combination: output dimensions differ");
    if (f.dimension != 0 && g.dimension != 0 && f.dimension != g.dimension) {
        throw ConfigError("linear_combination: data dimensions differ");
    }
    Functional h;
    h.name = std::to_string(a) + "*" + f.name + "+" + std::to_string(b) + "*" + g.name;
    h.output_dim = f.output_dim;
    h.dimension = f.dimension != 0 ? f.dimension : g.dimension;
    h.value = [=](const Eigen::MatrixXd& c) -> Eigen::VectorXd { return a * f.value(c) + b * g.value(c); };
    h.gradient = [=](const Eigen::MatrixXd& c) {
        auto x = f.gradient(c);
        const auto y = g.gradient(c);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * x[i] + b * y[i];
        return x;
    };
    h.hessian = [=](const Eigen::MatrixXd& c) {
        auto x = f.hessian(c);
        const auto y = g.hessian(c);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = a * x[i] + b * y[i];
        return x;
    };
    h.guard = [=](const Eigen::MatrixXd& c) -> std::optional<std::string> {
        if (auto why = f.guard(c)) return why;
        return g.guard(c);
    };
    h.repair = [=](const Eigen::MatrixXd& c) {
        Eigen::MatrixXd x = f.guard(c) ? f.repair(c) : sym(c);
        if (g.guard(x)) x = g.repair(x);
        return x;
    };
    return h;
}

std::vector<std::string> builtin_names() {
    return {"identity", "entry", "power_entry", "log_scalar", "square_scalar", "laplace", "regression_beta", "eigenvalue",
            "eigenvector"};
}

Functional builtin(const FunctionalSpec& spec, int d) {
    auto need = [&](std::size_t count) {
        if (spec.indices.size() != count) {
            throw ConfigError(spec.name + ": expects " + std::to_string(count) + " indices, got " +
                              std::to_string(spec.indices.size()));
        }
    };
    Functional f;
    if (spec.name == "identity") {
        need(0);
        f = identity_functional();
    } else if (spec.name == "entry") {
        need(2);
        f = entry_functional(spec.indices[0], spec.indices[1], d);
    } else if (spec.name == "power_entry") {
        need(4);
        f = power_entry(spec.indices[0], spec.indices[1], spec.indices[2], spec.indices[3], d);
    } else if (spec.name == "log_scalar" || spec.name == "log") {
        need(0);
        f = log_scalar();
    } else if (spec.name == "square_scalar" || spec.name == "square") {
        need(0);
        f = square_scalar();
    } else if (spec.name == "laplace") {
        need(0);
        f = laplace(spec.w);
    } else if (spec.name == "regression_beta") {
        need(0);
        f = regression_beta(d);
    } else if (spec.name == "eigenvalue") {
        need(1);
        f = eigenvalue(spec.indices[0], d);
    } else if (spec.name == "eigenvector") {
        need(1);
        f = eigenvector(spec.indices[0], d);
    } else {
        std::string known;
        for (const auto& n : builtin_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown functional '" + spec.name + "' (known: " + known + ")");
    }
    if (!spec.label.empty()) f.name = spec.label;
    return f;
}

FdReport fd_verify(const Functional& f, const Eigen::MatrixXd& c, double h) {
    if (!(h > 0.0)) throw ConfigError("fd_verify: step must be > 0");
    f.check(c);
    const int d = static_cast<int>(c.rows());
    const auto grad = f.gradient(c);
    const auto hess = f.hessian(c);

    double gscale = 0.0, gerr = 0.0, hscale = 0.0, herr = 0.0;
    for (int l = 0; l < d; ++l) {
        for (int m = 0; m < d; ++m) {
            Eigen::MatrixXd up = c, dn = c;
            up(l, m) += h;
            dn(l, m) -= h;
            f.check(up);
            f.check(dn);
            const Eigen::VectorXd dv = (f.value(up) - f.value(dn)) / (2.0 * h);
            const auto gu = f.gradient(up);
            const auto gd = f.gradient(dn);
            for (int a = 0; a < f.output_dim; ++a) {
                const auto ua = static_cast<std::size_t>(a);
                gscale = std::max(gscale, std::abs(grad[ua](l, m)));
                gerr = std::max(gerr, std::abs(dv[a] - grad[ua](l, m)));
                const Eigen::MatrixXd dh = (gu[ua] - gd[ua]) / (2.0 * h);
                for (int j = 0; j < d; ++j)
                    for (int k = 0; k < d; ++k) {
                        hscale = std::max(hscale, std::abs(hess[ua](j, k, l, m)));
                        herr = std::max(herr, std::abs(dh(j, k) - hess[ua](j, k, l, m)));
                    }
            }
        }
    }
    FdReport r;
    r.gradient_error = gscale > 0.0 ? gerr / gscale : gerr;
    r.hessian_error = hscale > 0.0 ? herr / hscale : herr;
    return r;
}

}  // namespace hfvol
