#include <cstdlib>

#include "hfvol/simd.hpp"

namespace hfvol::simd {

#if HFVOL_HAVE_AVX2
const Kernels& avx2_table();
#endif

const Kernels* avx2() {
#if HFVOL_HAVE_AVX2
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const Kernels& active() {
    static const Kernels& chosen = [] () -> const Kernels& {
        const char* force = std::getenv("HFVOL_FORCE_SCALAR");
        if (force != nullptr && *force != '\0' && *force != '0') return scalar();
        const Kernels* k = avx2();
        return k != nullptr ? *k : scalar();
    }();
    return chosen;
}

}  // namespace hfvol::simd
