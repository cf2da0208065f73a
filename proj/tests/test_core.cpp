#include <doctest.h>

#include <cmath>

#include "glucast/core.hpp"

using namespace glucast;

TEST_CASE("persistence repeats the last value") {
    auto f = persistence_forecast(TimeSeries::from_values({100, 110, 120}), 2);
    CHECK(f.values == std::vector<double>{120, 120});
    CHECK(f.model_id == ModelId::Persistence);
    CHECK(f.horizon == 2);

    CHECK(persistence_forecast(TimeSeries::from_values({49}), 1).values == std::vector<double>{49});

    auto c = persistence_forecast(TimeSeries::from_values(std::vector<double>(50, 111.9)), 5);
    CHECK(c.values == std::vector<double>(5, 111.9));
}

TEST_CASE("persistence rejects a nonpositive horizon") {
    CHECK_THROWS_AS(persistence_forecast(TimeSeries::from_values({100}), 0), UsageError);
}

TEST_CASE("forecast timestamps follow the origin") {
    auto s = TimeSeries::from_values({100, 101}, 1000, 300);
    auto f = persistence_forecast(s, 3);
    CHECK(f.origin_timestamp == 1300);
    CHECK(f.timestamp_at(1) == 1600);
    CHECK(f.timestamp_at(3) == 2200);
}

TEST_CASE("time series validates its grid and values") {
    CHECK_THROWS_AS(TimeSeries({}, 300), DataError);
    CHECK_THROWS_AS(TimeSeries({{0, 100}, {300, 100}, {700, 100}}, 300), DataError);
    CHECK_THROWS_AS(TimeSeries({{0, 100}, {0, 100}}, 300), DataError);
    CHECK_THROWS_AS(TimeSeries::from_values({100, 0}), DataError);
    CHECK_THROWS_AS(TimeSeries::from_values({100, 1000}), DataError);
    CHECK_THROWS_AS(TimeSeries::from_values({100, std::nan("")}), DataError);
    CHECK_THROWS_AS(TimeSeries::from_values({100}, 0, 0), DataError);
    CHECK_NOTHROW(TimeSeries::from_values({999.9, 0.1}));
}

TEST_CASE("standardized series may hold nonpositive values") {
    auto s = TimeSeries::from_values({-1.0, 0.0, 1.0}, 0, 300, "", Scale::Standardized);
    CHECK(s.size() == 3);
    CHECK(s.scale() == Scale::Standardized);
}

TEST_CASE("slice keeps the grid") {
    auto s = TimeSeries::from_values({1, 2, 3, 4, 5}, 600, 300, "p1");
    auto t = s.slice(1, 4);
    CHECK(t.values() == std::vector<double>{2, 3, 4});
    CHECK(t.timestamp(0) == 900);
    CHECK(t.subject_id() == "p1");
    CHECK_THROWS(s.slice(3, 2));
    CHECK_THROWS(s.slice(0, 6));
}

TEST_CASE("model ids round-trip through their names") {
    for (auto id : {ModelId::DFS, ModelId::AutoARIMA, ModelId::BATS, ModelId::TBATS, ModelId::TimeGlu,
                    ModelId::Persistence}) {
        CHECK(model_id_from_string(to_string(id)) == id);
    }
    CHECK_THROWS_AS(model_id_from_string("LSTM"), UsageError);
}

TEST_CASE("forecast rejects non-finite values and flags nonpositive ones") {
    CHECK_THROWS_AS(Forecast(0, 300, {1.0, INFINITY}, ModelId::DFS), FitError);
    CHECK_THROWS_AS(Forecast(0, 300, {}, ModelId::DFS), UsageError);
    CHECK(Forecast(0, 300, {0.0, -2.0}, ModelId::DFS).flagged);
    CHECK_FALSE(Forecast(0, 300, {1.0}, ModelId::DFS).flagged);
}

TEST_CASE("error kinds map to exit codes") {
    CHECK(static_cast<int>(UsageError("x").kind()) == 1);
    CHECK(static_cast<int>(DataError("x").kind()) == 2);
    CHECK(static_cast<int>(FitError("x").kind()) == 3);
}
