#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace glucast {

/**
 * Seeded generator used for every stochastic component.
 *
 * The stream is fully specified so other implementations can reproduce it:
 *  - raw bits: std::mt19937_64 seeded with the 64-bit seed;
 *  - uniform(): (bits >> 11) * 2^-53, in [0, 1);
 *  - normal(): Box-Muller on two uniforms u1, u2 with u1 mapped to (0, 1]
 *    as 1 - uniform(); returns r*cos(2*pi*u2) first and caches r*sin(2*pi*u2)
 *    for the next call.
 *  - below(n): uniform() * n truncated (n small; bias is irrelevant here).
 * std::normal_distribution is not used because its algorithm is
 * implementation-defined.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(angle);
        has_spare_ = true;
        return r * std::cos(angle);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    std::size_t below(std::size_t n) {
        const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    /// Fisher-Yates, last element first.
    template <typename Vec>
    void shuffle(Vec& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace glucast
