#pragma once

#include <cstdint>
#include <limits>

namespace dmorse {

/// Counter-based 64-bit generator (SplitMix64 in counter mode).
///
/// Output i of a stream with key K is mix64(K + (i + 1) * 0x9E3779B97F4A7C15),
/// so any position of a stream can be reached without stepping through the
/// previous outputs. Independent substreams are derived by hashing the parent
/// key with a stream index:
///
///     substream(K, j).key = mix64(K ^ mix64(j + 0xD1B54A32D192ED03))
///
/// Trial t of schedule entry s under master seed S therefore always draws from
/// Rng(S).substream(s).substream(t), whatever the thread that runs it.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) : key_(mix64(seed)), counter_(0) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix64(key_ + (++counter_) * kGolden); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1).
    double uniform_open() {
        double u;
        do u = uniform();
        while (u == 0.0);
        return u;
    }

    Rng substream(std::uint64_t index) const {
        Rng r;
        r.key_ = mix64(key_ ^ mix64(index + 0xD1B54A32D192ED03ULL));
        r.counter_ = 0;
        return r;
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t key_;
    std::uint64_t counter_;
};

}  // namespace dmorse
