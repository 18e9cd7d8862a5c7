#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace gchmm {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace detail

// Seeded random source. Substreams are derived by hashing (seed, keys...), so a
// person's stream never depends on how many other people exist.
class Rng {
  public:
    using engine_type = std::mt19937_64;

    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const noexcept { return seed_; }

    Rng substream(std::initializer_list<std::uint64_t> keys) const {
        std::uint64_t h = detail::splitmix64(seed_ ^ 0x5851f42d4c957f2dULL);
        for (auto k : keys)
            h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632be59bd9b4e019ULL));
        return Rng(h);
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double gamma(double shape) {
        std::gamma_distribution<double> d(shape, 1.0);
        return d(engine_);
    }

    // Beta(a, b) via the gamma ratio; falls back to the mean when both draws underflow.
    double beta(double a, double b) {
        const double x = gamma(a);
        const double y = gamma(b);
        const double s = x + y;
        if (!(s > 0.0))
            return a / (a + b);
        return x / s;
    }

    double normal(double mean = 0.0, double sd = 1.0) {
        std::normal_distribution<double> d(mean, sd);
        return d(engine_);
    }

    // Index drawn proportionally to nonnegative weights; the last positive index absorbs rounding.
    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights)
            total += w;
        double u = uniform() * total;
        std::size_t last = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] <= 0.0)
                continue;
            last = i;
            if (u < weights[i])
                return i;
            u -= weights[i];
        }
        return last;
    }

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

    engine_type &engine() noexcept { return engine_; }

  private:
    std::uint64_t seed_;
    engine_type engine_;
};

} // namespace gchmm
