#include "glucast/eval.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "glucast/digest.hpp"

namespace glucast::eval {

using nlohmann::json;

namespace {

void check_pair(const std::vector<double>& actual, const std::vector<double>& predicted) {
    if (actual.empty()) throw DataError("metric needs at least one pair");
    if (actual.size() != predicted.size()) {
        throw DataError("length mismatch: " + std::to_string(actual.size()) + " actuals vs " +
                        std::to_string(predicted.size()) + " predictions");
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

double mae(const std::vector<double>& actual, const std::vector<double>& predicted) {
    check_pair(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
    return sum / static_cast<double>(actual.size());
}

double mape(const std::vector<double>& actual, const std::vector<double>& predicted) {
    check_pair(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (!(actual[i] > 0.0)) throw DataError("MAPE undefined at nonpositive actual");
        sum += std::abs(actual[i] - predicted[i]) / actual[i];
    }
    return sum / static_cast<double>(actual.size());
}

std::string_view to_string(RefitPolicy policy) {
    return policy == RefitPolicy::Once ? "once" : "every-origin";
}

RefitPolicy refit_policy_from_string(std::string_view name) {
    if (name == "once") return RefitPolicy::Once;
    if (name == "every-origin") return RefitPolicy::EveryOrigin;
    throw UsageError("unknown refit policy '" + std::string(name) + "' (expected once or every-origin)");
}

void BacktestProtocol::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw UsageError("train fraction must lie in (0, 1)");
    if (horizon < 1) throw UsageError("horizon must be >= 1");
    if (stride < 1) throw UsageError("stride must be >= 1");
}

json BacktestProtocol::to_json() const {
    return {{"train_fraction", train_fraction},
            {"horizon", horizon},
            {"stride", stride},
            {"refit", std::string(to_string(refit))}};
}

std::vector<std::size_t> backtest_origins(std::size_t n, const BacktestProtocol& protocol) {
    protocol.validate();
    const auto n_train = static_cast<std::size_t>(std::ceil(protocol.train_fraction * static_cast<double>(n) - 1e-9));
    std::vector<std::size_t> origins;
    const auto k = static_cast<std::size_t>(protocol.horizon);
    const auto stride = static_cast<std::size_t>(protocol.stride);
    for (std::size_t o = std::max<std::size_t>(n_train, 1); o + k <= n; o += stride) {
        origins.push_back(o);
    }
    return origins;
}

BacktestResult backtest(const ForecasterConfig& config, const TimeSeries& series, const BacktestProtocol& protocol) {
    const auto origins = backtest_origins(series.size(), protocol);
    if (origins.empty()) {
        throw DataError("series of length " + std::to_string(series.size()) +
                        " has no valid forecast origins for this protocol");
    }
    BacktestResult out;
    auto model = make_forecaster(config);
    if (protocol.refit == RefitPolicy::Once) {
        const auto t0 = std::chrono::steady_clock::now();
        model->fit(series.slice(0, origins.front()));
        out.fit_seconds += seconds_since(t0);
    }
    std::vector<double> actual, predicted;
    for (const std::size_t o : origins) {
        const auto history = series.slice(0, o);
        if (protocol.refit == RefitPolicy::EveryOrigin) {
            const auto t0 = std::chrono::steady_clock::now();
            model->fit(history);
            out.fit_seconds += seconds_since(t0);
        }
        const auto t0 = std::chrono::steady_clock::now();
        const Forecast f = model->forecast(history, protocol.horizon);
        out.predict_seconds += seconds_since(t0);
        out.flagged = out.flagged || f.flagged;
        for (int h = 1; h <= protocol.horizon; ++h) {
            const std::size_t target = o + static_cast<std::size_t>(h) - 1;
            out.predictions.push_back({o, h, series.timestamp(target), series.value(target),
                                       f.values[static_cast<std::size_t>(h - 1)]});
            actual.push_back(series.value(target));
            predicted.push_back(f.values[static_cast<std::size_t>(h - 1)]);
        }
    }
    out.mae = mae(actual, predicted);
    out.mape = mape(actual, predicted);
    return out;
}

RangeStats range_stats(const TimeSeries& series, double lo, double hi) { return range_stats(series.samples(), lo, hi); }

RangeStats range_stats(const std::vector<GlucoseSample>& samples, double lo, double hi) {
    if (!(lo < hi)) throw UsageError("range thresholds need lo < hi");
    if (samples.empty()) throw DataError("empty series");
    RangeStats r;
    r.lo = lo;
    r.hi = hi;
    std::size_t below = 0, above = 0;
    std::vector<double> day_values;
    std::int64_t current_day = 0;
    auto flush = [&] {
        if (day_values.empty()) return;
        const auto [mn, mx] = std::minmax_element(day_values.begin(), day_values.end());
        r.days.push_back({current_day * 86400, day_values.size(), *mn, median_of(day_values), *mx});
        day_values.clear();
    };
    for (const auto& s : samples) {
        if (s.value < lo) ++below;
        if (s.value > hi) ++above;
        const std::int64_t day = floor_div(s.timestamp, 86400);
        if (!day_values.empty() && day != current_day) flush();
        current_day = day;
        day_values.push_back(s.value);
    }
    flush();
    const auto n = static_cast<double>(samples.size());
    r.tbr = static_cast<double>(below) / n;
    r.tar = static_cast<double>(above) / n;
    r.tir = static_cast<double>(samples.size() - below - above) / n;
    return r;
}

json EvalReport::to_json() const {
    json rows_json = json::array();
    for (const auto& row : rows) {
        json r = {{"model_id", std::string(glucast::to_string(row.config.model_id))},
                  {"label", row.config.display_name()},
                  {"config_digest", row.config_digest}};
        if (row.ok()) {
            r["status"] = "ok";
            r["mae"] = row.result->mae;
            r["mape"] = row.result->mape;
            r["n_predictions"] = row.result->predictions.size();
            r["flagged"] = row.result->flagged;
        } else {
            r["status"] = "error";
            r["error"] = row.error;
        }
        rows_json.push_back(std::move(r));
    }
    return {{"format", "glucast-report"},
            {"version", kVersion},
            {"dataset_digest", dataset_digest},
            {"series_length", series_length},
            {"protocol", protocol.to_json()},
            {"rows", std::move(rows_json)}};
}

json EvalReport::timings_json() const {
    json out = json::array();
    for (const auto& row : rows) {
        json r = {{"label", row.config.display_name()}, {"config_digest", row.config_digest}};
        if (row.ok()) {
            r["fit_seconds"] = row.result->fit_seconds;
            r["predict_seconds"] = row.result->predict_seconds;
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string EvalReport::table() const {
    std::vector<std::array<std::string, 4>> cells;
    cells.push_back({"Model", "MAE", "MAPE", "N"});
    char buf[64];
    for (const auto& row : rows) {
        std::array<std::string, 4> c;
        c[0] = row.config.display_name();
        if (row.ok()) {
            std::snprintf(buf, sizeof buf, "%.3f", row.result->mae);
            c[1] = buf;
            std::snprintf(buf, sizeof buf, "%.3f", row.result->mape);
            c[2] = buf;
            c[3] = std::to_string(row.result->predictions.size());
        } else {
            c[1] = "failed: " + row.error;
        }
        cells.push_back(std::move(c));
    }
    std::array<std::size_t, 4> width{};
    for (const auto& c : cells) {
        for (std::size_t i = 0; i < 4; ++i) width[i] = std::max(width[i], c[i].size());
    }
    std::ostringstream out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        const auto& c = cells[r];
        std::string line = c[0] + std::string(width[0] - c[0].size(), ' ');
        if (r > 0 && !rows[r - 1].ok()) {
            line += "  " + c[1];
        } else {
            for (std::size_t i = 1; i < 4; ++i) line += "  " + std::string(width[i] - c[i].size(), ' ') + c[i];
        }
        out << line << '\n';
        if (r == 0) {
            std::size_t total = width[0];
            for (std::size_t i = 1; i < 4; ++i) total += 2 + width[i];
            out << std::string(total, '-') << '\n';
        }
    }
    return out.str();
}

EvalReport compare(const std::vector<ForecasterConfig>& models, const TimeSeries& series,
                   const BacktestProtocol& protocol, const CompareOptions& options) {
    if (models.empty()) throw UsageError("compare needs at least one model");
    protocol.validate();
    std::vector<ForecasterConfig> configs = models;
    const bool has_baseline = std::any_of(configs.begin(), configs.end(),
                                          [](const auto& c) { return c.model_id == ModelId::Persistence; });
    if (options.add_persistence && !has_baseline) {
        auto base = ForecasterConfig::defaults(ModelId::Persistence, series.interval_s());
        base.horizon = protocol.horizon;
        configs.push_back(base);
    }

    EvalReport report;
    report.protocol = protocol;
    report.dataset_digest = series_digest(series);
    report.series_length = series.size();
    report.rows.resize(configs.size());

    const auto count = static_cast<std::ptrdiff_t>(configs.size());
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        auto& row = report.rows[static_cast<std::size_t>(i)];
        row.config = configs[static_cast<std::size_t>(i)];
        row.config_digest = row.config.digest();
        try {
            row.result = backtest(row.config, series, protocol);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    }

    std::vector<std::size_t> order(report.rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = report.rows[a];
        const auto& rb = report.rows[b];
        if (ra.ok() != rb.ok()) return ra.ok();
        if (ra.ok() && ra.result->mae != rb.result->mae) return ra.result->mae < rb.result->mae;
        return ra.config.model_id < rb.config.model_id;
    });
    std::vector<ReportRow> sorted;
    sorted.reserve(order.size());
    for (const std::size_t i : order) sorted.push_back(std::move(report.rows[i]));
    report.rows = std::move(sorted);
    return report;
}

}  // namespace glucast::eval
