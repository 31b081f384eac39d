#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace d2dpa {

// Seedable, splittable RNG. Core generator is xoshiro256**, seeded via
// splitmix64 so that nearby seeds give unrelated streams. split(i) derives
// an independent stream from the root seed and the index, so parallel
// generation is reproducible regardless of scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    std::uint64_t seed() const { return seed_; }

    Rng split(std::uint64_t index) const {
        std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL + index);
        std::uint64_t h = splitmix64(x);
        h ^= splitmix64(x);
        return Rng(h);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1): 53 random mantissa bits.
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double uniform_pos() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Rayleigh(sigma) via inverse CDF.
    double rayleigh(double sigma) {
        if (sigma <= 0.0) throw std::invalid_argument("rayleigh: scale must be > 0");
        return sigma * std::sqrt(-2.0 * std::log(uniform_pos()));
    }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t seed_;
    std::uint64_t s_[4];
};

}  // namespace d2dpa
