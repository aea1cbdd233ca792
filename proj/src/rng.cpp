#include "hfvol/rng.hpp"

#include <cmath>
#include <numbers>

namespace hfvol {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t replication, std::uint32_t channel) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    // Words 0-1 count blocks; replication and channel fix the rest.
    counter_ = {0u, 0u, static_cast<std::uint32_t>(replication) ^ static_cast<std::uint32_t>(replication >> 32) * 0x85EBCA6Bu,
                channel};
}

void RandomStream::refill() {
    block_ = philox4x32(counter_, key_);
    if (++counter_[0] == 0) ++counter_[1];
    used_ = 0;
}

std::uint32_t RandomStream::next_u32() {
    if (used_ == 4) refill();
    return block_[static_cast<std::size_t>(used_++)];
}

double RandomStream::uniform() {
    const std::uint64_t hi = next_u32();
    const std::uint64_t lo = next_u32();
    const std::uint64_t bits = ((hi << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
}

std::uint32_t RandomStream::poisson(double lambda) {
    if (!(lambda > 0.0)) return 0;
    // Large means are split into chunks so e^{-lambda} stays representable.
    if (lambda > 30.0) {
        std::uint32_t total = 0;
        double rest = lambda;
        while (rest > 30.0) {
            total += poisson(30.0);
            rest -= 30.0;
        }
        return total + poisson(rest);
    }
    if (lambda != cached_lambda_) {
        cached_lambda_ = lambda;
        cached_exp_ = std::exp(-lambda);
    }
    const double u = uniform();
    std::uint32_t k = 0;
    double p = cached_exp_;
    double s = p;
    while (u > s && k < 1000u) {
        ++k;
        p *= lambda / k;
        s += p;
    }
    return k;
}

}  // namespace hfvol
