#pragma once

#include <cstdint>
#include <random>

namespace scoreforge {

/// Engine used everywhere a seed is involved. The draw helpers below avoid
/// the standard distributions so that results do not depend on the
/// standard library implementation.
using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for task `index` under `seed`.
inline Engine stream_engine(std::uint64_t seed, std::uint64_t index) {
    return Engine(splitmix64(seed ^ index));
}

/// Uniform integer in [0, n). n must be positive.
inline std::uint64_t uniform_index(Engine& eng, std::uint64_t n) {
    const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % n);
    std::uint64_t v = eng();
    while (v >= limit) {
        v = eng();
    }
    return v % n;
}

/// Uniform double in [lo, hi].
inline double uniform_real(Engine& eng, double lo, double hi) {
    const double u = double(eng() >> 11) * (1.0 / 9007199254740991.0); // [0, 1]
    return lo + (hi - lo) * u;
}

} // namespace scoreforge
