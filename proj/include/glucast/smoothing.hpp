#pragma once

#include <utility>
#include <vector>

#include "glucast/core.hpp"

namespace glucast::smoothing {

/// Double exponential smoothing (Holt linear trend) state after a fit.
/// Reported under the DFS model id.
struct DesState {
    double alpha = 0.5;
    double beta = 0.5;
    double level = 0.0;  // s_t
    double trend = 0.0;  // b_t
    std::int64_t last_timestamp = 0;
    std::int64_t interval_s = kDefaultIntervalSeconds;
    std::vector<double> fitted;  // fitted[t-1] = s_{t-1} + b_{t-1}, one-step predictions of x_1..x_{n-1}
};

/**
 * Runs the level/trend recursion
 *   s_t = a*x_t + (1-a)*(s_{t-1} + b_{t-1})
 *   b_t = b*(s_t - s_{t-1}) + (1-b)*b_{t-1}
 * from s_0 = x_0, b_0 = x_1 - x_0. Requires at least two points.
 */
DesState des_fit(const TimeSeries& series, double alpha, double beta);
DesState des_fit(const std::vector<double>& values, double alpha, double beta);

/// Feeds further observations through an existing state (the recursion is online).
DesState des_update(DesState state, const std::vector<double>& more_values);

/// values[i-1] = s + i*b. No clamping.
Forecast des_forecast(const DesState& state, int k);

/// In-sample one-step sum of squared errors for (alpha, beta).
double des_sse(const std::vector<double>& values, double alpha, double beta);

/// The 0.05..0.95 grid (step 0.05) used for parameter selection.
std::vector<double> des_grid();

/// Arg-min of des_sse over des_grid()^2; ties go to smaller alpha then smaller beta.
std::pair<double, double> des_grid_search(const TimeSeries& train);

}  // namespace glucast::smoothing
