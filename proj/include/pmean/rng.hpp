#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace pmean {

/// splitmix64 step; the workhorse for all seed derivation in this project.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Folds one component into a seed. Associative chains of derive() give the
/// per-policy / per-sample sub-streams; the mixing is platform-independent.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t component) {
    std::uint64_t s = seed ^ (component + 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(seed, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
    return derive_seed(derive_seed(seed, a, b), c);
}

/// FNV-1a over bytes; used for stable string hashes (policy ids) and content
/// hashes of serialized artifacts.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64_accum(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffULL;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Deterministic RNG with platform-independent uniform doubles. std::mt19937
/// plus the standard distributions would tie results to one stdlib; the
/// project needs bit-stable streams across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // multiply-shift; bias is negligible for the n used here (< 2^32)
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Index sampled from an (unnormalized-tolerant) probability row.
    std::size_t categorical(std::span<const double> probs) {
        double u = uniform();
        double acc = 0.0;
        std::size_t last = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            acc += probs[i];
            last = i;
            if (u < acc) return i;
        }
        return last; // guards against cumulative rounding at u ~ 1
    }

private:
    std::uint64_t state_;
};

} // namespace pmean
