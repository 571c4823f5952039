#pragma once

// Deterministic random sampling.
//
// std::mt19937_64 output is pinned by the standard, but the standard
// *distributions* (normal, uniform_real, ...) are implementation-defined, so
// identical seeds can give different draws across standard libraries. Every
// sampler here is hand-rolled on top of the raw engine output to keep runs
// bit-reproducible across platforms.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "promptlab/util.hpp"

namespace promptlab {

/// splitmix64 finalizer; mixes key material into seed words.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Combine an arbitrary list of 64-bit keys into one seed.
inline uint64_t derive_seed(std::initializer_list<uint64_t> keys) {
    uint64_t h = 0x8c7f0aac97c4aa2full;
    for (uint64_t k : keys) h = mix64(h ^ mix64(k));
    return h;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    /// Uniform on [0, 1): top 53 bits of one engine draw.
    double uniform01() { return double(eng_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (two engine draws per call, no cache).
    double normal01() {
        double u1 = 1.0 - uniform01();  // (0, 1]: keeps log() finite
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        uint64_t span = uint64_t(hi - lo) + 1;
        uint64_t v = uint64_t(uniform01() * double(span));
        if (v >= span) v = span - 1;  // uniform01() < 1 makes this unreachable, belt & braces
        return lo + int64_t(v);
    }

    /// Fisher-Yates in-place shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(uniform_int(0, int64_t(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

/// Standard normal CDF (used for synthesizing percentile fields).
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488016887242097); }

}  // namespace promptlab
