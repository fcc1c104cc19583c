#pragma once

// Reproducible randomness. The standard library's distributions are
// implementation-defined, so only the engine (whose output sequence the
// standard fixes) is borrowed; every transform on top of it lives here.
//
//   uniform01  : top 53 bits of one mt19937_64 draw, scaled by 2^-53 -> [0, 1)
//   normal     : Box-Muller on two uniforms, second variate cached
//   below(n)   : rejection sampling on 64-bit draws, no modulo bias
//   derive_seed: splitmix64 finalizer over (parent, key)

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <utility>

namespace prevmle {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for stream `key` under `parent`. Distinct keys give unrelated streams.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t key) noexcept {
    return splitmix64(splitmix64(parent) ^ splitmix64(key + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t draw = engine_();
        while (draw >= limit) {
            draw = engine_();
        }
        return draw % n;
    }

    double normal() {
        if (spare_) {
            const double z = *spare_;
            spare_.reset();
            return z;
        }
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        return radius * std::cos(angle);
    }

    double normal(double mean, double std_dev) { return mean + std_dev * normal(); }

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

} // namespace prevmle
