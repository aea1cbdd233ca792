#pragma once

#include <array>
#include <cstdint>

namespace hfvol {

/// Philox4x32-10 block function: 128-bit counter, 64-bit key.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based random stream keyed by (seed, replication, channel).
/// Streams with different keys never overlap, so replications and channels
/// can be drawn in any order or thread and still reproduce bit for bit.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t replication, std::uint32_t channel);

    std::uint32_t next_u32();
    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    double normal();
    /// Poisson(lambda) by inversion; e^{-lambda} is cached across calls with
    /// the same lambda.
    std::uint32_t poisson(double lambda);

private:
    void refill();

    std::array<std::uint32_t, 2> key_{};
    std::array<std::uint32_t, 4> counter_{};
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    bool have_spare_ = false;
    double spare_ = 0.0;
    double cached_lambda_ = -1.0;
    double cached_exp_ = 0.0;
};

}  // namespace hfvol
