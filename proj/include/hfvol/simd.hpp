#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace hfvol::simd {

struct TruncatedSum {
    double sum = 0.0;
    std::size_t kept = 0;
};

/// Function table for the hot inner loops. `scalar()` is the reference
/// implementation; `avx2()` returns nullptr when the build or the CPU lacks
/// AVX2/FMA.
struct Kernels {
    std::string_view name;
    /// out[i] = sum_h x[i + h] * w[h], for i < out.size();
    /// requires x.size() >= out.size() + w.size() - 1.
    void (*sliding_dot)(std::span<const double> x, std::span<const double> w, std::span<double> out);
    double (*dot)(std::span<const double> x, std::span<const double> y);
    /// sum of x[i] * y[i] over i with mask[i] != 0.
    double (*masked_dot)(std::span<const double> x, std::span<const double> y, std::span<const unsigned char> mask);
    /// sum of x[i]^2 over |x[i]| <= limit, plus the number of kept entries.
    TruncatedSum (*truncated_square_sum)(std::span<const double> x, double limit);
    double (*sum)(std::span<const double> x);
};

const Kernels& scalar();
const Kernels* avx2();

/// AVX2 when available unless HFVOL_FORCE_SCALAR is set, scalar otherwise.
/// Resolved once per process.
const Kernels& active();

}  // namespace hfvol::simd
