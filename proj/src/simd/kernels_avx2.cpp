#include <immintrin.h>

#include <cmath>

#include "hfvol/simd.hpp"

namespace hfvol::simd {
namespace {

double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Four outputs at a time: each lane accumulates one output over h.
void sliding_dot(std::span<const double> x, std::span<const double> w, std::span<double> out) {
    const std::size_t m = w.size();
    const std::size_t n = out.size();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
        __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
        const double* p = x.data() + i;
        for (std::size_t h = 0; h < m; ++h) {
            const __m256d wh = _mm256_broadcast_sd(&w[h]);
            a0 = _mm256_fmadd_pd(_mm256_loadu_pd(p + h), wh, a0);
            a1 = _mm256_fmadd_pd(_mm256_loadu_pd(p + h + 4), wh, a1);
            a2 = _mm256_fmadd_pd(_mm256_loadu_pd(p + h + 8), wh, a2);
            a3 = _mm256_fmadd_pd(_mm256_loadu_pd(p + h + 12), wh, a3);
        }
        _mm256_storeu_pd(out.data() + i, a0);
        _mm256_storeu_pd(out.data() + i + 4, a1);
        _mm256_storeu_pd(out.data() + i + 8, a2);
        _mm256_storeu_pd(out.data() + i + 12, a3);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_setzero_pd();
        for (std::size_t h = 0; h < m; ++h) {
            a = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i + h), _mm256_broadcast_sd(&w[h]), a);
        }
        _mm256_storeu_pd(out.data() + i, a);
    }
    for (; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t h = 0; h < m; ++h) acc = std::fma(x[i + h], w[h], acc);
        out[i] = acc;
    }
}

double dot(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i), a0);
        a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x.data() + i + 4), _mm256_loadu_pd(y.data() + i + 4), a1);
    }
    double acc = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double masked_dot(std::span<const double> x, std::span<const double> y, std::span<const unsigned char> mask) {
    const std::size_t n = x.size();
    __m256d a = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d keep = _mm256_castsi256_pd(_mm256_set_epi64x(mask[i + 3] ? -1 : 0, mask[i + 2] ? -1 : 0,
                                                                     mask[i + 1] ? -1 : 0, mask[i] ? -1 : 0));
        const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(x.data() + i), _mm256_loadu_pd(y.data() + i));
        a = _mm256_add_pd(a, _mm256_and_pd(prod, keep));
    }
    double acc = hsum(a);
    for (; i < n; ++i) {
        if (mask[i]) acc += x[i] * y[i];
    }
    return acc;
}

TruncatedSum truncated_square_sum(std::span<const double> x, double limit) {
    const std::size_t n = x.size();
    const __m256d sign = _mm256_set1_pd(-0.0);
    const __m256d lim = _mm256_set1_pd(limit);
    __m256d a = _mm256_setzero_pd();
    std::size_t kept = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x.data() + i);
        const __m256d keep = _mm256_cmp_pd(_mm256_andnot_pd(sign, v), lim, _CMP_LE_OQ);
        a = _mm256_add_pd(a, _mm256_and_pd(_mm256_mul_pd(v, v), keep));
        kept += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(_mm256_movemask_pd(keep))));
    }
    TruncatedSum r{hsum(a), kept};
    for (; i < n; ++i) {
        if (std::abs(x[i]) <= limit) {
            r.sum += x[i] * x[i];
            ++r.kept;
        }
    }
    return r;
}

double sum(std::span<const double> x) {
    const std::size_t n = x.size();
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x.data() + i));
        a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x.data() + i + 4));
    }
    double acc = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace

const Kernels& avx2_table() {
    static const Kernels k{"avx2", sliding_dot, dot, masked_dot, truncated_square_sum, sum};
    return k;
}

}  // namespace hfvol::simd
