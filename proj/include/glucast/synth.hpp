#pragma once

#include <cstdint>
#include <vector>

#include "glucast/core.hpp"

namespace glucast::synth {

struct Meal {
    double hour = 0.0;    // time of day the bump starts
    double height = 0.0;  // peak rise in mg/dL
};

/// CGM-like trace: daily sinusoid plus meal bumps plus Gaussian noise.
struct CgmConfig {
    int days = 9;
    std::int64_t interval_s = kDefaultIntervalSeconds;
    std::int64_t start = 1704067200;  // 2024-01-01T00:00:00Z
    double baseline = 110.0;
    double daily_amplitude = 12.0;
    double peak_hour = 4.0;  // dawn-phenomenon style maximum of the sinusoid
    std::vector<Meal> meals{{7.5, 60.0}, {12.5, 70.0}, {19.0, 85.0}};
    double meal_peak_minutes = 50.0;
    double noise_sigma = 5.0;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Noise-free signal at a time of day measured in seconds since midnight.
double cgm_signal(const CgmConfig& config, double seconds_of_day);

TimeSeries synthetic_cgm(const CgmConfig& config);

/// Mean and population variance the generator targets: moments of the
/// noise-free signal over the sampling grid plus the noise variance.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};
Moments expected_moments(const CgmConfig& config);

/// Pure sinusoid a + b*sin(2*pi*t/period) plus N(0, sigma^2) noise.
std::vector<double> sinusoid(std::size_t n, double period, double level, double amplitude, double sigma,
                             std::uint64_t seed);

/// x_t = phi * x_{t-1} + e_t with a burn-in of 200 discarded steps.
std::vector<double> ar1(std::size_t n, double phi, double sigma, std::uint64_t seed);

}  // namespace glucast::synth
