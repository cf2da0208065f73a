#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glucast/core.hpp"
#include "glucast/forecaster.hpp"

namespace glucast::eval {

double mae(const std::vector<double>& actual, const std::vector<double>& predicted);
/// Mean of |y - yhat| / y as a ratio (not percent).
double mape(const std::vector<double>& actual, const std::vector<double>& predicted);

enum class RefitPolicy { Once, EveryOrigin };

std::string_view to_string(RefitPolicy policy);
RefitPolicy refit_policy_from_string(std::string_view name);

struct BacktestProtocol {
    double train_fraction = 0.8;
    int horizon = 1;
    int stride = 1;
    RefitPolicy refit = RefitPolicy::Once;

    void validate() const;
    nlohmann::json to_json() const;
};

/// One pooled prediction. `origin` is the history length at forecast time,
/// so the target is series[origin + offset - 1].
struct Prediction {
    std::size_t origin = 0;
    int offset = 0;
    std::int64_t timestamp = 0;
    double actual = 0.0;
    double predicted = 0.0;
};

struct BacktestResult {
    std::vector<Prediction> predictions;
    double mae = 0.0;
    double mape = 0.0;
    bool flagged = false;  // some forecast was clamped or nonpositive
    double fit_seconds = 0.0;
    double predict_seconds = 0.0;
};

/// Forecast origins: n_train, n_train + stride, ... while origin + k <= n.
std::vector<std::size_t> backtest_origins(std::size_t n, const BacktestProtocol& protocol);

BacktestResult backtest(const ForecasterConfig& config, const TimeSeries& series, const BacktestProtocol& protocol);

struct DaySummary {
    std::int64_t day_start = 0;  // UTC midnight
    std::size_t count = 0;
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

struct RangeStats {
    double lo = 70.0;
    double hi = 180.0;
    double tbr = 0.0;  // fraction below lo
    double tir = 0.0;  // fraction in [lo, hi]
    double tar = 0.0;  // fraction above hi
    std::vector<DaySummary> days;
};

RangeStats range_stats(const TimeSeries& series, double lo = 70.0, double hi = 180.0);
/// Same on raw (possibly irregular) samples sorted by time.
RangeStats range_stats(const std::vector<GlucoseSample>& samples, double lo = 70.0, double hi = 180.0);

struct ReportRow {
    ForecasterConfig config;
    std::string config_digest;
    std::optional<BacktestResult> result;
    std::string error;  // set when the backtest failed

    bool ok() const { return result.has_value(); }
};

struct EvalReport {
    static constexpr int kVersion = 1;

    BacktestProtocol protocol;
    std::string dataset_digest;
    std::size_t series_length = 0;
    std::vector<ReportRow> rows;

    /// Versioned structured report. Wall-clock timings are left out so that
    /// seeded reruns produce identical bytes; see timings_json().
    nlohmann::json to_json() const;
    nlohmann::json timings_json() const;
    /// Aligned plain-text table: Model, MAE, MAPE, N.
    std::string table() const;
};

struct CompareOptions {
    bool add_persistence = true;
    bool parallel = true;
};

/// Backtests every model on the same folds; rows sorted by MAE, ties by model
/// id order then input order, failed rows last.
EvalReport compare(const std::vector<ForecasterConfig>& models, const TimeSeries& series,
                   const BacktestProtocol& protocol, const CompareOptions& options = {});

}  // namespace glucast::eval
