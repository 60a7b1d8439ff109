#pragma once

#include <cstdint>

namespace sdt {

/// Counter-based, splittable pseudo-random generator.
///
/// The n-th draw (n = 0, 1, ...) of a stream with key K is
///
///     mix64(K + (n + 1) * 0x9E3779B97F4A7C15)
///
/// where mix64 is the SplitMix64 finalizer:
///
///     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///     z =  z ^ (z >> 31)
///
/// A stream created from a seed has key mix64(seed). split(id) derives an
/// independent child stream with key mix64(K ^ mix64(id + 0x632BE59BD9B4E019)).
/// Uniform doubles take the top 53 bits: (u >> 11) * 2^-53, in [0, 1).
/// Normal deviates use Box-Muller on two consecutive uniforms, returning the
/// cosine branch only, so every normal() consumes exactly two draws.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : key_(mix64(seed)) {}

    static constexpr std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() {
        ++counter_;
        return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal.
    double normal();

    /// Uniform integer in [0, n). Uses multiply-shift on the top 32 bits, n < 2^32.
    std::uint64_t below(std::uint64_t n) { return ((next_u64() >> 32) * n) >> 32; }

    Rng split(std::uint64_t stream_id) const {
        Rng child;
        child.key_ = mix64(key_ ^ mix64(stream_id + 0x632BE59BD9B4E019ULL));
        return child;
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace sdt
