#include <doctest.h>

#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "hfvol/errors.hpp"
#include "hfvol/kernel_moments.hpp"
#include "hfvol/preaveraging.hpp"
#include "hfvol/simulation.hpp"

using namespace hfvol;
using testing_support::brownian;

namespace {

constexpr double kDay = 1.0 / 23400.0;

std::string tuning_error(double kappa, double rho, double nu) {
    TuningInputs in;
    in.kappa = kappa;
    in.rho = rho;
    in.nu = nu;
    in.alpha = 1.0;
    try {
        (void)validate_tuning(kDay, in);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

TuningParams explicit_tuning(double delta, double alpha, TruncationMode mode = TruncationMode::global_norm) {
    TuningInputs in;
    in.alpha = alpha;
    in.truncation = mode;
    return validate_tuning(delta, in);
}

ObservationSet path_from(std::vector<double> v, double delta = 1.0) {
    const std::size_t n = v.size();
    return ObservationSet(RegularGrid{delta, n}, 1, std::move(v));
}

}  // namespace

TEST_CASE("tuning windows of the benchmark study") {
    TuningInputs in;
    in.alpha = 1.0;
    const TuningParams tp = validate_tuning(kDay, in);
    CHECK(tp.l_n == 153);
    CHECK(tp.k_n == static_cast<int>(std::lround(std::pow(kDay, -0.69))));
    CHECK(tp.m_n == 152);
    CHECK(tp.nu_n == doctest::Approx(std::pow(kDay, 0.47)));
    CHECK(rho_lower_bound(0.69, 0.5) == doctest::Approx(0.25 + 0.31 / 1.5));

    in.floor_mode = true;
    const TuningParams fl = validate_tuning(kDay, in);
    CHECK(fl.k_n == static_cast<int>(std::floor(std::pow(kDay, -0.69))));
    CHECK(fl.l_n == static_cast<int>(std::floor(std::sqrt(23400.0))));

    CHECK(tuning_error(0.5, 0.47, 0.5).find("kappa") != std::string::npos);
    CHECK(tuning_error(0.69, 0.47, 1.0).find("nu") != std::string::npos);
    CHECK(tuning_error(0.69, 0.40, 0.5).find("rho") != std::string::npos);
    CHECK(tuning_error(0.69, 0.50, 0.5).find("rho") != std::string::npos);
    CHECK(tuning_error(0.75, 0.47, 0.5).find("kappa") != std::string::npos);
    CHECK(tuning_error(0.69, 0.47, 0.5).empty());

    TuningInputs bad;
    bad.alpha = 1.0;
    bad.varrho = 0.01;  // k_n below l_n
    CHECK_THROWS_AS(validate_tuning(kDay, bad), ConfigError);
    bad = TuningInputs{};
    bad.theta = 0.001;  // l_n < 2
    CHECK_THROWS_AS(validate_tuning(kDay, bad), ConfigError);
    bad = TuningInputs{};
    bad.theta = -1.0;
    CHECK_THROWS_AS(validate_tuning(kDay, bad), ConfigError);
}

TEST_CASE("tuning grid accepts exactly the admissible window") {
    int accepted = 0;
    for (int a = 0; a <= 40; ++a) {
        const double kappa = 0.6 + 0.2 * a / 40.0;
        for (int b = 0; b <= 40; ++b) {
            const double rho = 0.3 + 0.25 * b / 40.0;
            for (double nu : {0.0, 0.25, 0.5, 0.75, 0.9, 0.99}) {
                const bool admissible = kappa > std::max(2.0 / 3.0, (2.0 + nu) / 4.0) && kappa < 0.75 &&
                                        rho >= 0.25 + (1.0 - kappa) / (2.0 - nu) && rho < 0.5;
                const bool ok = tuning_error(kappa, rho, nu).empty();
                CHECK(ok == admissible);
                accepted += ok;
            }
        }
    }
    CHECK(accepted > 0);
}

TEST_CASE("bar increment examples") {
    const KernelMoments km2 = discrete_weights(default_kernel(), 2);
    const ObservationSet y = path_from({0.0, 1.5, -0.5, 2.0, 2.25});
    for (std::size_t i = 1; i + 1 < y.size(); ++i) {
        CHECK(bar_increment(y, i, km2)[0] == doctest::Approx(y.at(i, 0) - y.at(i - 1, 0)).epsilon(1e-15));
    }
    const ObservationSet flat = path_from(std::vector<double>(50, 3.0));
    const KernelMoments km = discrete_weights(default_kernel(), 10);
    CHECK(bar_increment(flat, 1, km).norm() == 0.0);
    CHECK(hat_increment(flat, 1, km).norm() == 0.0);

    // unit step between samples j-1 and j: only increment j is nonzero
    const int l = 10;
    for (int h = 1; h < l; ++h) {
        std::vector<double> v(40, 0.0);
        const std::size_t i = 5;
        const std::size_t j = i + static_cast<std::size_t>(h) - 1;
        for (std::size_t q = j; q < v.size(); ++q) v[q] = 1.0;
        const ObservationSet step = path_from(v);
        CHECK(bar_increment(step, i, km)[0] ==
              doctest::Approx(km.weights[static_cast<std::size_t>(h - 1)] / std::sqrt(km.psi_n)).epsilon(1e-14));
    }
    CHECK_THROWS_AS(bar_increment(flat, 0, km), RangeError);
    CHECK_THROWS_AS(bar_increment(flat, 41, km), RangeError);
    CHECK_NOTHROW(bar_increment(flat, 40, km));
}

TEST_CASE("hat increment examples") {
    const KernelMoments km2 = discrete_weights(default_kernel(), 2);
    const ObservationSet y = path_from({0.0, 1.5, -0.5, 2.0, 2.25});
    for (std::size_t i = 1; i + 2 < y.size(); ++i) {
        const double a = y.at(i, 0) - y.at(i - 1, 0);
        const double b = y.at(i + 1, 0) - y.at(i, 0);
        CHECK(hat_increment(y, i, km2)(0, 0) == doctest::Approx(0.5 * a * a + 0.5 * b * b).epsilon(1e-15));
    }
    RandomStream rs(3, 0, 0);
    const ObservationSet multi = brownian(200, 1.0, testing_support::random_psd(3, rs, 0.1, 1.0), 5);
    const KernelMoments km = discrete_weights(default_kernel(), 12);
    for (std::size_t i = 1; i + 12 < 200; i += 7) {
        const Eigen::MatrixXd h = hat_increment(multi, i, km);
        CHECK((h - h.transpose()).norm() == 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("bar increment is linear and shift invariant") {
    RandomStream rs(9, 0, 0);
    const Eigen::MatrixXd c = testing_support::random_psd(2, rs, 0.5, 1.0);
    const ObservationSet u = brownian(300, 0.01, c, 1);
    const ObservationSet v = brownian(300, 0.01, c, 2);
    const KernelMoments km = discrete_weights(default_kernel(), 16);
    std::vector<double> w(u.raw().size()), shifted(u.raw().size());
    const double a = 0.75, b = -2.0;
    for (std::size_t q = 0; q < w.size(); ++q) {
        w[q] = a * u.raw()[q] + b * v.raw()[q];
        shifted[q] = u.raw()[q] + 123.0;
    }
    const ObservationSet combo(u.grid(), 2, w);
    const ObservationSet moved(u.grid(), 2, shifted);
    for (std::size_t i = 1; i + 16 <= 300; i += 11) {
        const Eigen::VectorXd lhs = bar_increment(combo, i, km);
        const Eigen::VectorXd rhs = a * bar_increment(u, i, km) + b * bar_increment(v, i, km);
        CHECK((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        CHECK((bar_increment(moved, i, km) - bar_increment(u, i, km)).norm() <= 1e-10);
    }
}

TEST_CASE("sliding-window path matches the direct formulas") {
    RandomStream rs(21, 0, 0);
    const Eigen::MatrixXd c = testing_support::random_psd(3, rs, 0.2, 1.0);
    const ObservationSet y = brownian(500, 0.001, c, 8, 0.01);
    for (int l : {2, 3, 7, 40}) {
        const KernelMoments km = discrete_weights(default_kernel(), l);
        const PreaveragedPath path(y, km);
        CHECK(path.last_index() == 500 - static_cast<std::size_t>(l));
        for (std::size_t i = 1; i <= path.last_index(); i += 3) {
            const Eigen::VectorXd bar = bar_increment(y, i, km);
            const Eigen::MatrixXd hat = hat_increment(y, i, km);
            for (int r = 0; r < 3; ++r) {
                CHECK(path.bar(r)[i - 1] == doctest::Approx(bar[r]).epsilon(1e-11).scale(1e-3));
                for (int s = r; s < 3; ++s) {
                    CHECK(path.hat(r, s)[i - 1] == doctest::Approx(hat(r, s)).epsilon(1e-11).scale(1e-6));
                }
            }
        }
    }
}

TEST_CASE("pilot scale") {
    const KernelMoments km = discrete_weights(default_kernel(), 153);
    const ObservationSet zero = path_from(std::vector<double>(23400, 0.0), kDay);
    CHECK(pilot_scale(zero, km)[0] == 0.0);
    CHECK_THROWS_AS(pilot_scale(path_from(std::vector<double>(306, 0.0), kDay), km), InsufficientDataError);

    double mean = 0.0;
    const int reps = 60;
    for (int rep = 0; rep < reps; ++rep) {
        const double s = pilot_scale(brownian(23400, kDay, 0.04, 100 + rep), km)[0];
        CHECK(s == doctest::Approx(0.04).epsilon(0.4));
        mean += s / reps;
    }
    CHECK(mean == doctest::Approx(0.04).epsilon(0.05));

    // noise is removed by the hat correction
    double noisy = 0.0;
    for (int rep = 0; rep < reps; ++rep) noisy += pilot_scale(brownian(23400, kDay, 0.04, 300 + rep, 0.005), km)[0] / reps;
    CHECK(noisy == doctest::Approx(0.04).epsilon(0.1));

    const ScenarioConfig sc = heston_jumps_scenario();
    TuningInputs in;
    const TuningParams tp = validate_tuning(sc.delta_n, in);
    const KernelMoments km6 = discrete_weights(default_kernel(), tp.l_n);
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
        const double s = pilot_scale(simulate(sc, rep).observations, km6)[0];
        CHECK(s >= 0.08);
        CHECK(s <= 0.32);
    }
}

TEST_CASE("truncation needs a resolved threshold") {
    const ObservationSet y = brownian(23400, kDay, 0.04, 1);
    const TuningParams pending = validate_tuning(kDay, TuningInputs{});
    CHECK_FALSE(pending.truncation_resolved());
    const KernelMoments km = make_kernel_moments(default_kernel(), pending.l_n);
    CHECK_THROWS_AS(spot_series(y, pending, km), ConfigError);
    const TuningParams done = resolve_truncation(pending, y, km);
    CHECK(done.truncation_resolved());
    const double sigma_bar = std::sqrt(pilot_scale(y, km)[0]);
    CHECK(done.alpha == doctest::Approx(2.0 * sigma_bar));
    CHECK(done.nu_n == doctest::Approx(done.alpha * std::pow(kDay, 0.47)));

    TuningInputs pc;
    pc.truncation = TruncationMode::per_component;
    pc.alpha = 3.0;
    const TuningParams p2 = validate_tuning(kDay, pc);
    CHECK_FALSE(p2.truncation_resolved());
    const TuningParams r2 = resolve_truncation(p2, y, km);
    REQUIRE(r2.per_component_alphas.size() == 1);
    CHECK(r2.per_component_alphas[0] == doctest::Approx(3.0));
}

TEST_CASE("spot covariance of a constant-volatility path") {
    const TuningParams tp = explicit_tuning(kDay, 1e6);
    const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
    double mean = 0.0;
    std::size_t count = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const SpotSeries s = spot_series(brownian(23400, kDay, 0.04, 1000 + rep), tp, km);
        for (const auto& c : s.c_hat) {
            mean += c(0, 0);
            ++count;
        }
    }
    mean /= static_cast<double>(count);
    CHECK(mean == doctest::Approx(0.04).epsilon(0.05));
}

TEST_CASE("untruncated spot covariance without noise correction is unbiased") {
    Eigen::MatrixXd c(2, 2);
    c << 0.04, 0.01, 0.01, 0.09;
    TuningInputs in;
    in.truncation = TruncationMode::disabled;
    in.alpha = 1.0;
    const TuningParams tp = validate_tuning(kDay, in);
    const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
    SpotOptions opts;
    opts.noise_correction = false;
    opts.psd_projection = false;
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 2);
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) {
        const ObservationSet y = brownian(static_cast<std::size_t>(tp.k_n) + 1, kDay, c, 2000 + rep);
        mean += spot_cov(y, 0, tp, km, opts).c / reps;
    }
    CHECK(mean(0, 0) == doctest::Approx(0.04).epsilon(0.05));
    CHECK(mean(1, 1) == doctest::Approx(0.09).epsilon(0.05));
    CHECK(mean(0, 1) == doctest::Approx(0.01).epsilon(0.15));
}

TEST_CASE("spot covariance edge cases") {
    const TuningParams tp = explicit_tuning(kDay, 1.0);
    const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
    const std::size_t n = static_cast<std::size_t>(tp.k_n) + 10;
    const ObservationSet zero = path_from(std::vector<double>(n, 0.0), kDay);
    const SpotEstimate z = spot_cov(zero, 0, tp, km);
    CHECK(z.c(0, 0) == 0.0);
    CHECK(z.truncated_fraction == 0.0);
    CHECK(z.summands == static_cast<std::size_t>(tp.k_n - tp.l_n + 1));
    CHECK_THROWS_AS(spot_cov(zero, 10, tp, km), RangeError);
    CHECK_NOTHROW(spot_cov(zero, 9, tp, km));

    // path overload agrees with the copying overload
    const ObservationSet y = brownian(3 * n, kDay, 0.04, 77, 0.001);
    const PreaveragedPath path(y, km);
    for (std::size_t i : {std::size_t{0}, std::size_t{17}, n}) {
        CHECK(spot_cov(path, i, tp).c(0, 0) == doctest::Approx(spot_cov(y, i, tp, km).c(0, 0)).epsilon(1e-9));
    }

    // shift invariance
    std::vector<double> moved(y.raw());
    for (double& v : moved) v += 50.0;
    const ObservationSet ym(y.grid(), 1, moved);
    CHECK(spot_cov(ym, 5, tp, km).c(0, 0) == doctest::Approx(spot_cov(y, 5, tp, km).c(0, 0)).epsilon(1e-7));
}

TEST_CASE("a large jump is removed by truncation") {
    // l_n = 2: the jump enters a single pre-averaged increment with weight 1
    const double delta = 1e-4;
    TuningInputs in;
    in.theta = 0.02;
    in.varrho = 0.02;
    in.alpha = 1.0;
    const TuningParams tp = validate_tuning(delta, in);
    REQUIRE(tp.l_n == 2);
    const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
    const std::size_t n = static_cast<std::size_t>(tp.k_n) + 5;
    std::vector<double> v(n, 0.0);
    for (std::size_t q = n / 2; q < n; ++q) v[q] = 10.0 * tp.nu_n;
    const ObservationSet jump = path_from(v, delta);
    SpotOptions opts;
    opts.noise_correction = false;
    const SpotEstimate e = spot_cov(jump, 0, tp, km, opts);
    CHECK(e.c(0, 0) == 0.0);
    CHECK(e.truncated_fraction > 0.0);

    // general window: the estimate equals the brute-force truncated sum
    const TuningParams tq = explicit_tuning(kDay, 1.0);
    const KernelMoments kq = make_kernel_moments(default_kernel(), tq.l_n);
    const std::size_t nq = static_cast<std::size_t>(tq.k_n) + 5;
    std::vector<double> w(nq, 0.0);
    for (std::size_t q = nq / 2; q < nq; ++q) w[q] = 10.0 * tq.nu_n;
    const ObservationSet big = path_from(w, kDay);
    double expect = 0.0;
    std::size_t dropped = 0;
    for (int h = 1; h <= tq.k_n - tq.l_n + 1; ++h) {
        const double b = bar_increment(big, static_cast<std::size_t>(h), kq)[0];
        if (std::abs(b) <= tq.nu_n) {
            expect += b * b;
        } else {
            ++dropped;
        }
        expect -= hat_increment(big, static_cast<std::size_t>(h), kq)(0, 0);
    }
    expect /= (tq.k_n - tq.l_n) * kDay;
    const SpotEstimate g = spot_cov(big, 0, tq, kq);
    CHECK(g.c(0, 0) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(dropped > 0);
    CHECK(g.truncated_fraction == doctest::Approx(static_cast<double>(dropped) / (tq.k_n - tq.l_n + 1)));
}

TEST_CASE("truncation is monotone in alpha") {
    const ObservationSet y = simulate(heston_jumps_scenario(3), 4).observations;
    const double delta = heston_jumps_scenario(3).delta_n;
    std::size_t last_kept = 0;
    for (double alpha : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 10.0}) {
        const TuningParams tp = explicit_tuning(delta, alpha);
        const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
        const SpotEstimate e = spot_cov(y, 0, tp, km);
        const auto kept = static_cast<std::size_t>(std::llround((1.0 - e.truncated_fraction) * e.summands));
        CHECK(kept >= last_kept);
        last_kept = kept;
    }
}

TEST_CASE("per-component truncation") {
    Eigen::MatrixXd c(2, 2);
    c << 0.04, 0.0, 0.0, 0.0004;
    const ObservationSet y = brownian(23400, kDay, c, 5);
    TuningInputs in;
    in.truncation = TruncationMode::per_component;
    in.per_component_alphas = {1.0, 0.01};
    const TuningParams tp = validate_tuning(kDay, in);
    CHECK(tp.truncation_resolved());
    const auto lim = tp.component_limits(2);
    CHECK(lim[1] == doctest::Approx(0.01 * std::pow(kDay, 0.47)));
    const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
    const SpotSeries s = spot_series(y, tp, km);
    CHECK(s.size() > 0);
    // a single global threshold scaled to component 0 never trims component 1
    in.truncation = TruncationMode::global_norm;
    in.alpha = 1.0;
    const SpotSeries g = spot_series(y, validate_tuning(kDay, in), km);
    double per = 0.0, glob = 0.0;
    for (std::size_t b = 0; b < s.size(); ++b) {
        per += s.truncated_fraction[b];
        glob += g.truncated_fraction[b];
    }
    CHECK(per >= glob);
}

TEST_CASE("spot noise") {
    TuningInputs in;
    in.alpha = 1.0;
    in.theta_prime = 10.0;
    const TuningParams tp = validate_tuning(kDay, in);
    RandomStream rs(31, 0, 0);
    std::vector<double> v(static_cast<std::size_t>(tp.m_n) + 1);
    for (double& x : v) x = 0.005 * rs.normal();
    const ObservationSet noise = path_from(v, kDay);
    CHECK(spot_noise(noise, 0, tp)(0, 0) == doctest::Approx(2.5e-5).epsilon(0.15));
    CHECK_THROWS_AS(spot_noise(noise, 1, tp), RangeError);

    const ObservationSet zero = path_from(std::vector<double>(v.size(), 0.0), kDay);
    CHECK(spot_noise(zero, 0, tp)(0, 0) == 0.0);

    const TuningParams t1 = explicit_tuning(kDay, 1.0);
    double mean = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        mean += spot_noise(brownian(static_cast<std::size_t>(t1.m_n) + 1, kDay, 0.04, 600 + rep), 0, t1)(0, 0) / 50;
    }
    CHECK(mean == doctest::Approx(0.04 * kDay / 2.0).epsilon(0.1));
}

TEST_CASE("psd projection") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 0, -2;
    const ProjectedMatrix p = psd_project(a);
    CHECK(p.projected);
    CHECK(p.matrix(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(p.matrix(1, 1)) < 1e-15);
    CHECK(std::abs(p.matrix(0, 1)) < 1e-15);

    RandomStream rs(41, 0, 0);
    for (int t = 0; t < 200; ++t) {
        const int d = 1 + t % 4;
        const Eigen::MatrixXd c = testing_support::random_psd(d, rs, 0.0, 1.0);
        const ProjectedMatrix q = psd_project(c);
        CHECK_FALSE(q.projected);
        CHECK((q.matrix - c).norm() <= 1e-15);
        const Eigen::MatrixXd s = testing_support::random_symmetric(d, rs);
        const ProjectedMatrix ps = psd_project(s);
        CHECK((psd_project(ps.matrix).matrix - ps.matrix).norm() <= 1e-10);
        CHECK((ps.matrix - c).norm() <= (s - c).norm() + 1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ps.matrix);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("spot series block layout") {
    const TuningParams tp = explicit_tuning(kDay, 1.0);
    const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
    const auto k = static_cast<std::size_t>(tp.k_n);
    const auto l = static_cast<std::size_t>(tp.l_n);
    const ObservationSet y = brownian(3 * k + l, kDay, 0.04, 12);
    const SpotSeries s = spot_series(y, tp, km);
    REQUIRE(s.size() == 3);
    for (std::size_t b = 0; b < 3; ++b) CHECK(s.block_indices[b] == b * k);
    CHECK(s.stride == k);
    CHECK_THROWS_AS(spot_series(brownian(k + l - 1, kDay, 0.04, 1), tp, km), InsufficientDataError);

    // exact multiple of k_n: the last block loses one summand but keeps its scale
    const ObservationSet exact = brownian(4 * k, kDay, 0.04, 13);
    const SpotSeries se = spot_series(exact, tp, km);
    CHECK(se.size() == 4);

    SpotOptions ov;
    ov.overlapping = true;
    const SpotSeries so = spot_series(y, tp, km, ov);
    CHECK(so.stride == 1);
    CHECK(so.size() == 3 * k + l - k);
}

TEST_CASE("spot series on the simulation model") {
    const ScenarioConfig sc = heston_jumps_scenario();
    const PathBundle b = simulate(sc, 2);
    const TuningParams tp0 = validate_tuning(sc.delta_n, TuningInputs{});
    const KernelMoments km = make_kernel_moments(default_kernel(), tp0.l_n);
    const TuningParams tp = resolve_truncation(tp0, b.observations, km);
    const auto start = std::chrono::steady_clock::now();
    const SpotSeries s = spot_series(b.observations, tp, km);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 1.0);
    CHECK(s.size() == b.observations.size() / static_cast<std::size_t>(tp.k_n));
    for (const auto& g : s.gamma_hat) {
        CHECK(g(0, 0) >= 1e-5);
        CHECK(g(0, 0) <= 5e-5);
    }
    for (double f : s.truncated_fraction) {
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
    }
}

TEST_CASE("cross-block spread of the spot estimates has the predicted order") {
    const TuningParams tp = explicit_tuning(kDay, 1e6);
    const KernelMoments km = make_kernel_moments(default_kernel(), tp.l_n);
    double s1 = 0.0, s2 = 0.0;
    std::size_t m = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const SpotSeries s = spot_series(brownian(23400, kDay, 0.04, 3000 + rep), tp, km);
        for (const auto& c : s.c_hat) {
            s1 += c(0, 0);
            s2 += c(0, 0) * c(0, 0);
            ++m;
        }
    }
    const double mean = s1 / static_cast<double>(m);
    const double sd = std::sqrt(s2 / static_cast<double>(m) - mean * mean);
    const double predicted = 0.04 / std::sqrt(tp.k_n * std::sqrt(kDay));
    CHECK(sd / predicted > 1.0 / 3.0);
    CHECK(sd / predicted < 3.0);
}
