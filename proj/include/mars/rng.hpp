#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mars {

// Splitmix-style mixer used to derive independent stream seeds from a base
// seed plus an ordinal. Never feed raw consecutive integers to Rng directly.
inline std::uint64_t mixSeed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Deterministic random source. The generator is mt19937_64 (its output
// sequence is pinned by the standard) and every distribution is derived from
// raw bits here, so streams are bit-reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // Uniform in [0, 1) with full 53-bit resolution.
    double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t x;
        do {
            x = bits();
        } while (x >= limit);
        return x % n;
    }

    // Box-Muller; the pair is cached so consumption order stays fixed.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (hasSpare_) {
            hasSpare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.28318530717958647692 * u2;
        spare_ = r * std::sin(a);
        hasSpare_ = true;
        return mean + stddev * r * std::cos(a);
    }

    // Fisher-Yates; same seed gives the same permutation.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool hasSpare_ = false;
    double spare_ = 0.0;
};

}  // namespace mars
