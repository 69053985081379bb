#pragma once

#include <cmath>
#include <cstdint>

#include "edt/core/tensor.hpp"

namespace edt::rng {

// Counter-based generator: every value is a pure function of (seed, index),
// so streams are platform-stable, splittable and resumable at any position.
//
// Documented recipe:
//   mix(seed, i) = splitmix64(splitmix64(seed) ^ (i * 0x9E3779B97F4A7C15 + 0xD1B54A32D192ED03))
//   u01(seed, i)   = (mix >> 11) * 2^-53                 in [0, 1)
//   normal(seed,i) = sqrt(-2 ln u1) * cos(2 pi u2)       Box-Muller,
//                    u1 = ((mix(seed,2i) >> 11) + 1) * 2^-53  in (0, 1],
//                    u2 = u01(seed, 2i+1)

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ (index * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
}

inline double u01(std::uint64_t seed, std::uint64_t index) {
    return static_cast<double>(mix(seed, index) >> 11) * 0x1.0p-53;
}

inline double normal(std::uint64_t seed, std::uint64_t index) {
    double u1 = static_cast<double>((mix(seed, 2 * index) >> 11) + 1) * 0x1.0p-53;
    double u2 = u01(seed, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// Sequential convenience wrapper over the counter stream.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::uint64_t start = 0) : seed_(seed), counter_(start) {}

    std::uint64_t next_u64() { return mix(seed_, counter_++); }
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal() {
        std::uint64_t i = counter_;
        counter_ += 1;
        return rng::normal(seed_, i);
    }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    /// Independent substream (for per-worker / per-sample derivation).
    Stream fork(std::uint64_t key) const { return Stream(mix(seed_, key ^ 0xA5A5A5A5A5A5A5A5ULL)); }

private:
    std::uint64_t seed_;
    std::uint64_t counter_;
};

inline Tensor normal_tensor(Shape shape, double stddev, Stream& s) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stddev * s.normal();
    return t;
}

}  // namespace edt::rng
