#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "ham/common.hpp"

namespace ham {

// SplitMix64. The output sequence is a pure function of the seed and is
// byte-exact across platforms (integer arithmetic only).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t state() const { return state_; }

    // Unbiased-enough bounded draw (Lemire multiply-shift); deterministic.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw ValueError("next_below: bound must be positive");
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Uniform in the open interval (0, 1).
    double next_unit() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Box-Muller; consumes two outputs per draw.
    double next_normal() {
        double u1 = next_unit();
        double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::uint64_t state_;
};

// Child streams: seed XOR stream-id passed through one generator round.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(seed ^ stream_id).next();
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream_name) {
    return derive_seed(seed, fnv1a64(stream_name));
}

}  // namespace ham
