#pragma once

#include <cmath>
#include <cstdint>

namespace levelline::rng {

// Counter-based randomness: every draw is a pure function of
// (seed, trajectory, step, substream). No shared stream, so trajectories
// can run in any order on any number of threads and reproduce exactly.

inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t counter_hash(uint64_t seed, uint64_t traj, uint64_t step, uint64_t sub) {
    uint64_t h = mix64(seed);
    h = mix64(h ^ traj);
    h = mix64(h ^ step);
    return mix64(h ^ sub);
}

/// Uniform on (0, 1), never exactly 0 or 1.
inline double uniform01(uint64_t h) {
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform(uint64_t seed, uint64_t traj, uint64_t step, uint64_t sub) {
    return uniform01(counter_hash(seed, traj, step, sub));
}

/// Standard normal via Box-Muller on two counter-derived uniforms.
/// Substreams 2*sub and 2*sub+1 are consumed.
inline double gaussian(uint64_t seed, uint64_t traj, uint64_t step, uint64_t sub = 0) {
    double u1 = uniform01(counter_hash(seed, traj, step, 2 * sub));
    double u2 = uniform01(counter_hash(seed, traj, step, 2 * sub + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace levelline::rng
