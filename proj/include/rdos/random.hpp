#pragma once

// Keyed, platform-stable pseudo-randomness.
//
// std::*_distribution output differs between standard libraries, so every
// draw that feeds a persisted record goes through these helpers instead.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>
#include <string_view>

namespace rdos {

[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

[[nodiscard]] constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Mixes an ordered list of keys into one 64-bit value.
[[nodiscard]] constexpr std::uint64_t hash_keys(std::initializer_list<std::uint64_t> keys) noexcept
{
    std::uint64_t h = 0x2545f4914f6cdd1dULL;
    for (const auto k : keys) {
        h = splitmix64(h ^ k);
    }
    return h;
}

[[nodiscard]] constexpr double to_unit(std::uint64_t bits) noexcept
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Uniform [0,1) keyed draw.
[[nodiscard]] constexpr double keyed_uniform(std::initializer_list<std::uint64_t> keys) noexcept
{
    return to_unit(hash_keys(keys));
}

/// Standard normal keyed draw (Box-Muller on two derived uniforms).
[[nodiscard]] inline double keyed_normal(std::initializer_list<std::uint64_t> keys) noexcept
{
    const std::uint64_t h = hash_keys(keys);
    const double u1 = 1.0 - to_unit(splitmix64(h));
    const double u2 = to_unit(splitmix64(h ^ 0xa5a5a5a5a5a5a5a5ULL));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential generator with portable uniform/normal/index helpers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform() { return to_unit(engine_()); }
    double normal()
    {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }
    /// Uniform index in [0, n). n must be positive.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

} // namespace rdos
