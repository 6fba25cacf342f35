#pragma once

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <utility>
#include <vector>

namespace cropmine {

// Portable seeded randomness. Every stochastic step in the toolkit draws from
// this generator so that scenes, samples and training runs are reproducible
// bit-for-bit across platforms and languages. The algorithms are fixed:
//
//   state init   splitmix64 (Steele, Lea, Flood 2014), four outputs
//   stream       xoshiro256++ (Blackman, Vigna 2019)
//   double       (next_u64() >> 11) * 2^-53, uniform in [0, 1)
//   bounded ints rejection sampling on masked draws (no modulo bias)
//   normal       Box-Muller, z = sqrt(-2 ln u1) * cos(2 pi u2), u1 in (0, 1]
//   shuffle      Fisher-Yates from the top index down
//
// Sub-streams are derived by hashing a stage name (FNV-1a 64) into the seed,
// so pipeline stages can be re-run independently with identical results.

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(const char* text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char* p = text; *p != '\0'; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derive a per-stage seed from a global seed and a stage name.
inline std::uint64_t sub_seed(std::uint64_t seed, const char* stage) {
    std::uint64_t s = seed ^ fnv1a64(stage);
    return splitmix64_next(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64_next(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). bound must be nonzero.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t mask = mask_for(bound);
        std::uint64_t draw;
        do {
            draw = next_u64() & mask;
        } while (draw >= bound);
        return draw;
    }

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t next_in(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Standard normal via Box-Muller. Draws exactly two uniforms per call.
    double next_normal() {
        // u1 in (0, 1] so the log is finite.
        const double u1 =
            static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
        const double u2 = next_double();
        const double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            const std::size_t j =
                static_cast<std::size_t>(next_below(static_cast<std::uint64_t>(i)));
            std::swap(values[i - 1], values[j]);
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    static std::uint64_t mask_for(std::uint64_t bound) {
        std::uint64_t mask = bound - 1;
        mask |= mask >> 1;
        mask |= mask >> 2;
        mask |= mask >> 4;
        mask |= mask >> 8;
        mask |= mask >> 16;
        mask |= mask >> 32;
        return mask;
    }

    std::uint64_t state_[4];
};

} // namespace cropmine
