#include <doctest.h>

#include <cmath>
#include <vector>

#include "hfvol/rng.hpp"
#include "hfvol/simd.hpp"

using namespace hfvol;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    RandomStream rs(seed, 0, 0);
    std::vector<double> v(n);
    for (double& x : v) x = rs.normal();
    return v;
}

double scale(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

void check_equivalent(const simd::Kernels& a, const simd::Kernels& b) {
    for (std::size_t n : {1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 1000u, 4099u}) {
        const auto x = noise(n + 40, n);
        const auto y = noise(n + 40, n + 1);
        for (std::size_t wlen : {1u, 2u, 3u, 5u, 8u, 13u, 33u}) {
            const auto w = noise(wlen, 100 + wlen);
            std::vector<double> oa(n + 40 - wlen + 1), ob(oa.size());
            a.sliding_dot(x, w, oa);
            b.sliding_dot(x, w, ob);
            for (std::size_t i = 0; i < oa.size(); ++i) CHECK(oa[i] == doctest::Approx(ob[i]).epsilon(1e-12).scale(10.0));
        }
        const std::span<const double> xs(x.data(), n), ys(y.data(), n);
        CHECK(a.dot(xs, ys) == doctest::Approx(b.dot(xs, ys)).epsilon(1e-13).scale(scale(x)));
        CHECK(a.sum(xs) == doctest::Approx(b.sum(xs)).epsilon(1e-13).scale(scale(x)));
        std::vector<unsigned char> mask(n);
        for (std::size_t i = 0; i < n; ++i) mask[i] = static_cast<unsigned char>((i * 7 + 3) % 3 != 0);
        CHECK(a.masked_dot(xs, ys, mask) == doctest::Approx(b.masked_dot(xs, ys, mask)).epsilon(1e-13).scale(scale(x)));
        for (double limit : {0.0, 0.5, 1.0, 10.0}) {
            const auto ta = a.truncated_square_sum(xs, limit);
            const auto tb = b.truncated_square_sum(xs, limit);
            CHECK(ta.kept == tb.kept);
            CHECK(ta.sum == doctest::Approx(tb.sum).epsilon(1e-13).scale(static_cast<double>(n)));
        }
    }
}

}  // namespace

TEST_CASE("scalar kernels against direct loops") {
    const simd::Kernels& s = simd::scalar();
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> w = {1, -1};
    std::vector<double> out(4);
    s.sliding_dot(x, w, out);
    CHECK(out == std::vector<double>{-1, -1, -1, -1});
    CHECK(s.dot(x, x) == 55.0);
    CHECK(s.sum(x) == 15.0);
    const std::vector<unsigned char> mask = {1, 0, 1, 0, 1};
    CHECK(s.masked_dot(x, x, mask) == 1 + 9 + 25);
    const auto t = s.truncated_square_sum(x, 3.0);
    CHECK(t.kept == 3);
    CHECK(t.sum == 14.0);
    const std::vector<double> e;
    CHECK(s.sum(e) == 0.0);
}

TEST_CASE("AVX2 kernels match the scalar reference") {
    const simd::Kernels* v = simd::avx2();
    if (!v) {
        MESSAGE("AVX2/FMA not available; skipping vector kernel equivalence");
        return;
    }
    check_equivalent(simd::scalar(), *v);
}

TEST_CASE("active kernels are one of the two tables") {
    const simd::Kernels& act = simd::active();
    CHECK((&act == &simd::scalar() || &act == simd::avx2()));
    check_equivalent(simd::scalar(), act);
}
