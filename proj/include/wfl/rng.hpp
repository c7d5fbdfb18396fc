#pragma once

// Seeded, splittable random streams for reproducible simulation.
//
// Streams are addressed by (master_seed, stream_id). Substreams are derived
// by hashing the parent stream with a sequence of integer labels, so any
// (trial, round, device) combination maps to its own independent stream
// without coordination between threads. The generator is xoshiro256++ with
// splitmix64 state expansion; all draws are produced by explicit bit-level
// arithmetic, never std::* distributions, so sequences are identical across
// compilers and platforms.

#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <cmath>

namespace wfl {

/// Identifies one deterministic random stream.
struct RngSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;

    friend bool operator==(const RngSpec&, const RngSpec&) = default;
};

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// splitmix64 step (Vigna); used for state expansion and label hashing.
inline constexpr std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += kGolden);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// 64-bit finalizer with full avalanche (murmur3 fmix64 constants).
inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xFF51AFD7ED558CCDull;
    x ^= x >> 33;
    x *= 0xC4CEB9FE1A85EC53ull;
    x ^= x >> 33;
    return x;
}

inline constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Hash-derives a substream. Distinct label sequences give streams that are
/// independent for simulation purposes; the same inputs always give the same
/// stream. Labels must be non-empty.
inline RngSpec derive_stream(RngSpec base, std::span<const std::uint64_t> labels) {
    if (labels.empty()) throw std::invalid_argument("derive_stream: labels must be non-empty");
    std::uint64_t h = base.stream_id;
    std::uint64_t i = 1;
    for (std::uint64_t label : labels) {
        h = detail::mix64(h ^ (detail::mix64(label + i * detail::kGolden) + (h << 6) + (h >> 2)));
        ++i;
    }
    return RngSpec{base.master_seed, h};
}

inline RngSpec derive_stream(RngSpec base, std::initializer_list<std::uint64_t> labels) {
    return derive_stream(base, std::span<const std::uint64_t>(labels.begin(), labels.size()));
}

/// xoshiro256++ generator bound to one RngSpec.
class StreamRng {
public:
    explicit StreamRng(RngSpec spec) {
        std::uint64_t sm = detail::mix64(spec.master_seed ^ detail::mix64(spec.stream_id + detail::kGolden));
        for (auto& word : state_) word = detail::splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// True with probability p. Requires p in [0, 1].
    bool bernoulli(double p) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("bernoulli: p must be in [0,1]");
        return uniform01() < p;
    }

    /// Uniform integer in [0, n). Unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t x = next_u64();
            if (x >= threshold) return x % n;
        }
    }

    /// Standard normal via Box-Muller (two uniforms per draw).
    double normal() {
        double u1 = 1.0 - uniform01();  // (0, 1]
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

private:
    std::uint64_t state_[4];
};

/// Stream label constants used throughout the harness. Streams are derived
/// as [purpose, coordinate...] so that e.g. device batches at a given round
/// are identical no matter which strategy consumes them.
namespace stream {
inline constexpr std::uint64_t kSelect = 1;   // + round
inline constexpr std::uint64_t kError = 2;    // + round
inline constexpr std::uint64_t kBatch = 3;    // + round, device
inline constexpr std::uint64_t kInit = 4;     // weight init
inline constexpr std::uint64_t kTrial = 5;    // + trial index
inline constexpr std::uint64_t kCenter = 6;   // quadratic-family centers
inline constexpr std::uint64_t kData = 7;     // synthetic data generation
inline constexpr std::uint64_t kPartition = 8;
inline constexpr std::uint64_t kProbe = 9;    // bound-constant probing
}  // namespace stream

}  // namespace wfl
