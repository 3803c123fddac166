#ifndef POWERGEAR_SEEDING_HPP
#define POWERGEAR_SEEDING_HPP

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace powergear {

// splitmix64 finalizer; stable across platforms, unlike std::hash.
inline std::uint64_t mix_u64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives a per-module RNG seed from the global seed and a label.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view label) {
    return mix_u64(global_seed ^ fnv1a(label));
}

inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view label,
                                 std::uint64_t salt) {
    return mix_u64(derive_seed(global_seed, label) ^ mix_u64(salt));
}

using Rng = std::mt19937_64;

// Portable draws: std::uniform_*_distribution output differs across standard
// libraries, these do not.
inline double rand_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double rand_uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * rand_unit(rng);
}

/// Uniform integer in [0, n).
inline std::uint64_t rand_index(Rng& rng, std::uint64_t n) {
    return n == 0 ? 0 : rng() % n;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rand_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace powergear

#endif
