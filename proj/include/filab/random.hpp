#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace filab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent streams from (seed, index).
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// The standard distributions are implementation-defined; these helpers keep
// every sampled value reproducible across standard libraries.

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Inverse-CDF draw from an unnormalized nonnegative weight vector.
inline int sample_categorical(Rng& rng, std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01(rng) * total;
    int last_positive = -1;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) continue;
        last_positive = static_cast<int>(i);
        if (u < weights[i]) return last_positive;
        u -= weights[i];
    }
    return last_positive;
}

/// Dirichlet(1, ..., 1) draw via normalized unit exponentials.
inline std::vector<double> sample_flat_dirichlet(Rng& rng, std::size_t n) {
    std::vector<double> out(n);
    double total = 0.0;
    for (auto& x : out) {
        x = -std::log1p(-uniform01(rng));
        total += x;
    }
    for (auto& x : out) x /= total;
    return out;
}

} // namespace filab
