#include "glucast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "glucast/rng.hpp"

namespace glucast::synth {

void CgmConfig::validate() const {
    if (days < 1) throw UsageError("days must be >= 1");
    if (interval_s < 1 || 86400 % interval_s != 0) throw UsageError("interval must divide one day");
    if (noise_sigma < 0.0) throw UsageError("noise sigma must be >= 0");
    if (meal_peak_minutes <= 0.0) throw UsageError("meal peak time must be positive");
}

double cgm_signal(const CgmConfig& config, double seconds_of_day) {
    const double hour = seconds_of_day / 3600.0;
    double v = config.baseline +
               config.daily_amplitude * std::cos(2.0 * std::numbers::pi * (hour - config.peak_hour) / 24.0);
    const double tp = config.meal_peak_minutes / 60.0;
    for (const auto& meal : config.meals) {
        // Gamma-shaped rise and decay, peak `height` at tp hours after the meal.
        // The previous day's meals spill over midnight.
        for (double shift : {0.0, 24.0}) {
            const double tau = hour + shift - meal.hour;
            if (tau > 0.0 && tau < 24.0) v += meal.height * (tau / tp) * std::exp(1.0 - tau / tp);
        }
    }
    return v;
}

TimeSeries synthetic_cgm(const CgmConfig& config) {
    config.validate();
    Rng rng(config.seed);
    const std::int64_t per_day = 86400 / config.interval_s;
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(per_day * config.days));
    for (std::int64_t i = 0; i < per_day * config.days; ++i) {
        const double sod = static_cast<double>((i * config.interval_s) % 86400);
        const double v = cgm_signal(config, sod) + rng.normal(0.0, config.noise_sigma);
        values.push_back(std::max(v, 40.0));
    }
    return TimeSeries::from_values(values, config.start, config.interval_s, "synthetic");
}

Moments expected_moments(const CgmConfig& config) {
    config.validate();
    const std::int64_t per_day = 86400 / config.interval_s;
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t i = 0; i < per_day; ++i) {
        const double s = cgm_signal(config, static_cast<double>(i * config.interval_s));
        sum += s;
        sumsq += s * s;
    }
    const double n = static_cast<double>(per_day);
    const double mean = sum / n;
    return {mean, sumsq / n - mean * mean + config.noise_sigma * config.noise_sigma};
}

std::vector<double> sinusoid(std::size_t n, double period, double level, double amplitude, double sigma,
                             std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        out[t] = level + amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period) +
                 rng.normal(0.0, sigma);
    }
    return out;
}

std::vector<double> ar1(std::size_t n, double phi, double sigma, std::uint64_t seed) {
    Rng rng(seed);
    double x = 0.0;
    for (int i = 0; i < 200; ++i) x = phi * x + rng.normal(0.0, sigma);
    std::vector<double> out(n);
    for (auto& v : out) {
        x = phi * x + rng.normal(0.0, sigma);
        v = x;
    }
    return out;
}

}  // namespace glucast::synth
