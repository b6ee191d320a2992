#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace keyfault {

/// Seedable generator with platform-stable output.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The std distributions are not, so every conversion below is spelled out.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound). `bound` must be non-zero.
    std::uint64_t below(std::uint64_t bound);

    double normal();
    /// Log-normal sample parameterised by its mean and coefficient of variation.
    double lognormal(double mean, double cv);

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t x);

/// Derives an independent stream seed from a base seed and a path of ids.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

}  // namespace keyfault
