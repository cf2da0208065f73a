#include "glucast/smoothing.hpp"

#include <limits>

namespace glucast::smoothing {

namespace {

void check_params(double alpha, double beta) {
    if (!(alpha >= 0.0 && alpha <= 1.0) || !(beta >= 0.0 && beta <= 1.0)) {
        throw UsageError("DES smoothing factors must lie in [0, 1]");
    }
}

void step(DesState& st, double x) {
    const double prev_level = st.level;
    const double forecast = st.level + st.trend;
    st.fitted.push_back(forecast);
    // Error-correction form of the same recursion; keeps exact fixed points exact.
    st.level = forecast + st.alpha * (x - forecast);
    st.trend = st.trend + st.beta * ((st.level - prev_level) - st.trend);
}

}  // namespace

DesState des_fit(const std::vector<double>& values, double alpha, double beta) {
    check_params(alpha, beta);
    if (values.size() < 2) throw DataError("DES needs at least 2 points");
    DesState st;
    st.alpha = alpha;
    st.beta = beta;
    st.level = values[0];
    st.trend = values[1] - values[0];
    st.fitted.reserve(values.size() - 1);
    for (std::size_t t = 1; t < values.size(); ++t) step(st, values[t]);
    return st;
}

DesState des_fit(const TimeSeries& series, double alpha, double beta) {
    if (series.size() < 2) throw DataError("DES needs at least 2 points");
    auto st = des_fit(series.values(), alpha, beta);
    st.last_timestamp = series.last_timestamp();
    st.interval_s = series.interval_s();
    return st;
}

DesState des_update(DesState state, const std::vector<double>& more_values) {
    for (double x : more_values) step(state, x);
    state.last_timestamp += static_cast<std::int64_t>(more_values.size()) * state.interval_s;
    return state;
}

Forecast des_forecast(const DesState& state, int k) {
    if (k < 1) throw UsageError("forecast horizon must be >= 1");
    std::vector<double> values(static_cast<std::size_t>(k));
    for (int i = 1; i <= k; ++i) values[static_cast<std::size_t>(i - 1)] = state.level + i * state.trend;
    return Forecast(state.last_timestamp, state.interval_s, std::move(values), ModelId::DFS);
}

double des_sse(const std::vector<double>& values, double alpha, double beta) {
    // Same recursion as des_fit without materializing `fitted`.
    double level = values[0];
    double trend = values[1] - values[0];
    double sse = 0.0;
    for (std::size_t t = 1; t < values.size(); ++t) {
        const double forecast = level + trend;
        const double e = values[t] - forecast;
        sse += e * e;
        const double prev = level;
        level = forecast + alpha * e;
        trend = trend + beta * ((level - prev) - trend);
    }
    return sse;
}

std::vector<double> des_grid() {
    std::vector<double> grid;
    for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
    return grid;
}

std::pair<double, double> des_grid_search(const TimeSeries& train) {
    if (train.size() < 3) throw DataError("DES grid search needs at least 3 points");
    const auto values = train.values();
    const auto grid = des_grid();
    double best = std::numeric_limits<double>::infinity();
    std::pair<double, double> arg{grid.front(), grid.front()};
    // Row-major over (alpha, beta) with strict '<' keeps the first minimizer.
    for (double a : grid) {
        for (double b : grid) {
            const double sse = des_sse(values, a, b);
            if (sse < best) {
                best = sse;
                arg = {a, b};
            }
        }
    }
    return arg;
}

}  // namespace glucast::smoothing
