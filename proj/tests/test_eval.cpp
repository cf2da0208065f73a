#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "glucast/eval.hpp"
#include "glucast/synth.hpp"
#include "oracles/classical.hpp"

using namespace glucast;
using namespace glucast::eval;

namespace {

TimeSeries ramp(std::size_t n, double start, double slope) {
    std::vector<double> x(n);
    for (std::size_t t = 0; t < n; ++t) x[t] = start + slope * static_cast<double>(t);
    return TimeSeries::from_values(x);
}

BacktestProtocol protocol(double f, int k, int stride, RefitPolicy refit = RefitPolicy::Once) {
    BacktestProtocol p;
    p.train_fraction = f;
    p.horizon = k;
    p.stride = stride;
    p.refit = refit;
    return p;
}

ForecasterConfig with_horizon(ModelId id, int k) {
    auto c = ForecasterConfig::defaults(id);
    c.horizon = k;
    return c;
}

}  // namespace

TEST_CASE("mae examples") {
    CHECK(mae({100, 110}, {100, 110}) == 0.0);
    CHECK(std::abs(mae({100, 110, 120}, {101, 108, 124}) - 7.0 / 3.0) <= 1e-12);
    CHECK(mae({100, 110, 120}, {101, 108, 124}) == mae({120, 100, 110}, {124, 101, 108}));
    CHECK_THROWS_AS(mae({1, 2}, {1}), DataError);
    CHECK_THROWS_AS(mae({}, {}), DataError);
}

TEST_CASE("mape examples") {
    CHECK(std::abs(mape({100}, {97}) - 0.03) <= 1e-12);
    CHECK(std::abs(mape({50, 200}, {55, 180}) - 0.1) <= 1e-12);
    CHECK_THROWS_WITH_AS(mape({100, 0}, {100, 1}), "MAPE undefined at nonpositive actual", DataError);
    CHECK_THROWS_AS(mape({100, -5}, {100, 1}), DataError);
}

TEST_CASE("metric properties") {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(50, 300);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> y(10), yhat(10);
        for (auto& v : y) v = u(gen);
        for (auto& v : yhat) v = u(gen);
        CHECK(mae(y, yhat) > 0.0);
        CHECK(mape(y, yhat) > 0.0);
        CHECK(mae(y, y) == 0.0);
        CHECK(mape(y, y) == 0.0);
        CHECK(std::abs(mae(y, yhat) - oracle::mae(y, yhat)) <= 1e-12);

        auto ys = y, yhats = yhat;
        for (auto& v : ys) v += 37.0;
        for (auto& v : yhats) v += 37.0;
        CHECK(std::abs(mae(ys, yhats) - mae(y, yhat)) <= 1e-9);
        CHECK(std::abs(mape(ys, yhats) - mape(y, yhat)) > 1e-6);
    }
}

TEST_CASE("protocol validation and origins") {
    CHECK_THROWS_AS(protocol(0.5, 0, 1).validate(), UsageError);
    CHECK_THROWS_AS(protocol(0.5, 1, 0).validate(), UsageError);
    CHECK_THROWS_AS(protocol(1.5, 1, 1).validate(), UsageError);

    auto o = backtest_origins(20, protocol(0.5, 1, 1));
    REQUIRE(o.size() == 10);
    CHECK(o.front() == 10);
    CHECK(o.back() == 19);
    CHECK(backtest_origins(20, protocol(0.5, 3, 4)) == std::vector<std::size_t>{10, 14});
    CHECK(backtest_origins(20, protocol(0.5, 11, 1)).empty());
    CHECK(to_string(RefitPolicy::EveryOrigin) == "every-origin");
    CHECK(refit_policy_from_string("once") == RefitPolicy::Once);
    CHECK_THROWS_AS(refit_policy_from_string("sometimes"), UsageError);
}

TEST_CASE("persistence on a constant series is perfect") {
    const auto flat = TimeSeries::from_values(std::vector<double>(30, 100.0));
    const auto r = backtest(with_horizon(ModelId::Persistence, 3), flat, protocol(0.5, 3, 1));
    CHECK(r.mae == 0.0);
    CHECK(r.mape == 0.0);
}

TEST_CASE("persistence on x_t = t misses by exactly one") {
    const auto s = ramp(20, 1.0, 1.0);
    const auto r = backtest(with_horizon(ModelId::Persistence, 1), s, protocol(0.5, 1, 1));
    REQUIRE(r.predictions.size() == 10);
    CHECK(r.mae == 1.0);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& p = r.predictions[i];
        CHECK(p.origin == 10 + i);
        CHECK(p.offset == 1);
        CHECK(p.actual == static_cast<double>(p.origin + 1));
        CHECK(p.predicted == static_cast<double>(p.origin));
        CHECK(p.timestamp == s.timestamp(p.origin));
    }
    CHECK(std::abs(r.mae - oracle::persistence_mae(s.values(), 10)) <= 1e-12);
}

TEST_CASE("DES on an exact line") {
    const auto s = ramp(80, 60.0, 1.25);
    for (auto refit : {RefitPolicy::Once, RefitPolicy::EveryOrigin}) {
        const auto r = backtest(with_horizon(ModelId::DFS, 4), s, protocol(0.7, 4, 2, refit));
        CHECK(r.mae <= 1e-6);
    }
}

TEST_CASE("striding selects a subset of the stride-1 pool") {
    const auto s = TimeSeries::from_values(synth::sinusoid(120, 24, 130, 20, 3, 5));
    const auto cfg = with_horizon(ModelId::DFS, 3);
    const auto all = backtest(cfg, s, protocol(0.6, 3, 1));
    const auto some = backtest(cfg, s, protocol(0.6, 3, 5));
    std::set<std::pair<std::size_t, int>> keys;
    for (const auto& p : all.predictions) keys.insert({p.origin, p.offset});
    CHECK(some.predictions.size() < all.predictions.size());
    for (const auto& p : some.predictions) CHECK(keys.count({p.origin, p.offset}) == 1);
    // With refit once the same fitted model is used, so the shared pairs agree.
    for (const auto& p : some.predictions) {
        const auto it = std::find_if(all.predictions.begin(), all.predictions.end(),
                                     [&](const Prediction& q) { return q.origin == p.origin && q.offset == p.offset; });
        CHECK(it->predicted == p.predicted);
    }
}

TEST_CASE("backtest needs an origin") {
    CHECK_THROWS_AS(backtest(with_horizon(ModelId::Persistence, 5), ramp(6, 100, 1), protocol(0.9, 5, 1)), DataError);
}

TEST_CASE("range stats") {
    const auto flat = range_stats(TimeSeries::from_values(std::vector<double>(10, 100.0)));
    CHECK(flat.tir == 1.0);
    CHECK(flat.tar == 0.0);
    CHECK(flat.tbr == 0.0);

    const auto three = range_stats(TimeSeries::from_values({49, 100, 261}));
    CHECK(three.tbr == doctest::Approx(1.0 / 3));
    CHECK(three.tir == doctest::Approx(1.0 / 3));
    CHECK(three.tar == doctest::Approx(1.0 / 3));

    CHECK_THROWS_AS(range_stats(TimeSeries::from_values({100}), 180, 70), UsageError);
    // Thresholds are inclusive on both ends of the in-range band.
    const auto edges = range_stats(TimeSeries::from_values({70, 180}));
    CHECK(edges.tir == 1.0);
}

TEST_CASE("range fractions partition and days are split at UTC midnight") {
    const auto s = synth::synthetic_cgm(synth::CgmConfig{});
    const auto r = range_stats(s, 100, 140);
    CHECK(std::abs(r.tir + r.tar + r.tbr - 1.0) <= 1e-9);
    REQUIRE(r.days.size() == 9);
    for (const auto& d : r.days) {
        CHECK(d.count == 288);
        CHECK(d.day_start % 86400 == 0);
        CHECK(d.min <= d.median);
        CHECK(d.median <= d.max);
    }

    std::vector<GlucoseSample> samples{{86400 - 300, 90}, {86400, 200}, {86400 + 300, 100}, {86400 + 600, 120}};
    const auto split = range_stats(samples);
    REQUIRE(split.days.size() == 2);
    CHECK(split.days[0].count == 1);
    CHECK(split.days[1].count == 3);
    CHECK(split.days[1].median == 120);
    CHECK(split.days[1].max == 200);
}

TEST_CASE("compare adds the baseline once") {
    const auto flat = TimeSeries::from_values(std::vector<double>(40, 100.0));
    const auto r = compare({with_horizon(ModelId::Persistence, 1)}, flat, protocol(0.5, 1, 1));
    REQUIRE(r.rows.size() == 1);
    CHECK(r.rows[0].ok());
    CHECK(r.rows[0].result->mae == 0.0);

    const auto two = compare({with_horizon(ModelId::DFS, 1)}, flat, protocol(0.5, 1, 1));
    REQUIRE(two.rows.size() == 2);
    CHECK(two.rows[1].config.model_id == ModelId::Persistence);
    const auto none = compare({with_horizon(ModelId::DFS, 1)}, flat, protocol(0.5, 1, 1), {false, true});
    CHECK(none.rows.size() == 1);
}

TEST_CASE("duplicates stay visible and identical") {
    const auto s = TimeSeries::from_values(synth::sinusoid(100, 24, 130, 20, 3, 8));
    const auto cfg = with_horizon(ModelId::DFS, 2);
    const auto r = compare({cfg, cfg}, s, protocol(0.7, 2, 1));
    REQUIRE(r.rows.size() == 3);
    std::vector<const ReportRow*> des;
    for (const auto& row : r.rows) {
        if (row.config.model_id == ModelId::DFS) des.push_back(&row);
    }
    REQUIRE(des.size() == 2);
    CHECK(des[0]->config_digest == des[1]->config_digest);
    CHECK(des[0]->result->mae == des[1]->result->mae);
}

TEST_CASE("DES ranks above persistence on trending data") {
    const auto s = ramp(100, 80, 0.8);
    const auto r = compare({with_horizon(ModelId::DFS, 3)}, s, protocol(0.8, 3, 1));
    REQUIRE(r.rows.size() == 2);
    CHECK(r.rows[0].config.model_id == ModelId::DFS);
    CHECK(r.rows[1].config.model_id == ModelId::Persistence);
    CHECK(r.rows[0].result->mae < r.rows[1].result->mae);
}

TEST_CASE("rows are sorted, ties by model id, failures last") {
    const auto flat = TimeSeries::from_values(std::vector<double>(40, 100.0));
    auto bad = with_horizon(ModelId::BATS, 1);  // 20 training points, needs 2 x 288
    const auto r = compare({bad, with_horizon(ModelId::DFS, 1)}, flat, protocol(0.5, 1, 1));
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[0].config.model_id == ModelId::DFS);  // MAE tie with persistence, DFS first by id
    CHECK(r.rows[1].config.model_id == ModelId::Persistence);
    CHECK_FALSE(r.rows[2].ok());
    CHECK_FALSE(r.rows[2].error.empty());
    const auto table = r.table();
    CHECK(table.find("failed: ") != std::string::npos);
    CHECK(table.rfind("Model", 0) == 0);

    const auto j = r.to_json();
    CHECK(j["format"] == "glucast-report");
    CHECK(j["version"] == EvalReport::kVersion);
    CHECK(j["rows"][2]["status"] == "error");
    CHECK(j["rows"][0]["n_predictions"] == 20);
    CHECK(j["protocol"]["horizon"] == 1);
    CHECK_FALSE(j.dump().find("seconds") != std::string::npos);
    CHECK(r.timings_json().size() == 3);
}

TEST_CASE("serial and parallel compare agree") {
    const auto s = TimeSeries::from_values(synth::sinusoid(150, 24, 130, 20, 3, 8));
    std::vector<ForecasterConfig> models{with_horizon(ModelId::DFS, 2)};
    auto arima = with_horizon(ModelId::AutoARIMA, 2);
    std::get<ArimaParams>(arima.params).search = {2, 1, 2, true};
    models.push_back(arima);
    const auto a = compare(models, s, protocol(0.8, 2, 3), {true, true});
    const auto b = compare(models, s, protocol(0.8, 2, 3), {true, false});
    CHECK(a.to_json().dump() == b.to_json().dump());
}
