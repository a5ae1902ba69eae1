#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace ocdgr
{

/// SplitMix64 finalizer. Used to turn correlated integers (counters, hashed
/// names, parent draws) into well-spread 64-bit seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over the bytes of a component name.
constexpr std::uint64_t hash_name(std::string_view name) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name)
    {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for a named component of an experiment:
///   derive_seed(master, name) = splitmix64(master ^ fnv1a64(name))
/// Components never share a stream, so e.g. enabling checkpoint evaluation
/// leaves the training stream untouched.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view component) noexcept
{
    return splitmix64(master ^ hash_name(component));
}

/// Explicitly seeded random stream. Copying an Rng copies its full state, so a
/// saved copy replays the exact same draws.
class Rng
{
public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). Rejection sampling, so unbiased for any n > 0.
    std::uint64_t uniform_index(std::uint64_t n)
    {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do
        {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Box-Muller, one draw per call (no cached second value, so the state is
    /// fully captured by the engine).
    double normal(double mean, double stddev)
    {
        double u1;
        do
        {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    /// Independent child stream. Advances this stream by exactly one draw.
    Rng split() { return Rng(splitmix64(engine_())); }

    engine_type& engine() noexcept { return engine_; }

    friend bool operator==(const Rng& lhs, const Rng& rhs) { return lhs.engine_ == rhs.engine_; }

private:
    engine_type engine_;
};

}  // namespace ocdgr
