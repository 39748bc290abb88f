#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace cavsense {

// SplitMix64 used as a counter-based generator: the n-th output depends only
// on (seed, n), so streams are reproducible across platforms and compilers.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : seed_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t at(std::uint64_t counter) const noexcept {
        return mix(seed_ + (counter + 1) * 0x9e3779b97f4a7c15ULL);
    }

    std::uint64_t next() noexcept { return at(counter_++); }

    // Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) noexcept {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next();
        } while (x >= limit);
        return x % n;
    }

    // Two independent standard normals (Box-Muller).
    std::pair<double, double> normal_pair() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(theta), r * std::sin(theta)};
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

// Derives an independent stream seed from a base seed and a tag sequence.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept {
    return SplitMix64::mix(SplitMix64::mix(base ^ 0x5851f42d4c957f2dULL) + a * 0x9e3779b97f4a7c15ULL + b);
}

}  // namespace cavsense
