#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace fedstat {

/// SplitMix64 step; advances `state` and returns the next output.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Folds a list of integers into one well-mixed 64-bit key. Each step is a
/// bijection of the running hash, so keys sharing a prefix never collide.
constexpr std::uint64_t mix_key(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x6A09E667F3BCC909ULL;
    for (auto p : parts) {
        h ^= p;
        h = splitmix64(h);
    }
    return h;
}

/**
 * xoshiro256** generator (Blackman & Vigna). Small state, so a fresh
 * instance per (client, iteration) key is cheap; satisfies
 * UniformRandomBitGenerator and plugs into <random> distributions.
 */
class Xoshiro256 {
public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept {
        for (auto& s : state_) s = splitmix64(seed);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

/// Independent purposes that draw randomness; part of every stream key.
enum class StreamTag : std::uint64_t {
    Data = 1,        // samples consumed by local SGD steps
    Inference = 2,   // fresh samples drawn at sync points for plug-in estimates
    Federation = 3,  // heterogeneous local optima
    Replication = 4, // per-replication seeds in the harness
    Brownian = 5,    // critical value simulation paths
};

inline Xoshiro256 keyed_stream(std::uint64_t seed, StreamTag tag, std::uint64_t a,
                               std::uint64_t b = 0) noexcept {
    return Xoshiro256(mix_key({seed, static_cast<std::uint64_t>(tag), a, b}));
}

} // namespace fedstat
