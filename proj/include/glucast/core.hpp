#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace glucast {

/// Error categories; the CLI maps these onto process exit codes.
enum class ErrorKind { Usage = 1, Data = 2, Fit = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct DataError : Error {
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct FitError : Error {
    explicit FitError(const std::string& what) : Error(ErrorKind::Fit, what) {}
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

/// Upper validity bound for a glucose reading in mg/dL. Catches mmol/L files.
inline constexpr double kGlucoseCeiling = 1000.0;
inline constexpr std::int64_t kDefaultIntervalSeconds = 300;

struct GlucoseSample {
    std::int64_t timestamp = 0;  // seconds since Unix epoch, UTC
    double value = 0.0;          // mg/dL

    bool operator==(const GlucoseSample&) const = default;
};

bool is_valid_glucose(double value) noexcept;

/// Units of the values held by a TimeSeries.
enum class Scale { MgDl, Standardized };

/**
 * Uniformly sampled glucose trace.
 *
 * Construction validates the grid: timestamps strictly increasing with a
 * constant step of `interval_s`, at least one sample, all values finite.
 * Series on the mg/dL scale must also lie inside (0, kGlucoseCeiling).
 * Instances are immutable.
 */
class TimeSeries {
public:
    TimeSeries(std::vector<GlucoseSample> samples, std::int64_t interval_s, std::string subject_id = {},
               Scale scale = Scale::MgDl);

    /// Builds a series on the grid start + i*interval from raw values.
    static TimeSeries from_values(const std::vector<double>& values,
                                  std::int64_t start = 0,
                                  std::int64_t interval_s = kDefaultIntervalSeconds,
                                  std::string subject_id = {},
                                  Scale scale = Scale::MgDl);

    const std::vector<GlucoseSample>& samples() const noexcept { return samples_; }
    std::int64_t interval_s() const noexcept { return interval_s_; }
    const std::string& subject_id() const noexcept { return subject_id_; }
    Scale scale() const noexcept { return scale_; }
    std::size_t size() const noexcept { return samples_.size(); }

    std::vector<double> values() const;
    double value(std::size_t i) const { return samples_.at(i).value; }
    std::int64_t timestamp(std::size_t i) const { return samples_.at(i).timestamp; }
    std::int64_t last_timestamp() const { return samples_.back().timestamp; }
    double last_value() const { return samples_.back().value; }

    /// Points [begin, end) as a new series on the same grid.
    TimeSeries slice(std::size_t begin, std::size_t end) const;
    /// Same grid, new values (length must match).
    TimeSeries with_values(const std::vector<double>& values, Scale scale) const;

    bool operator==(const TimeSeries&) const = default;

private:
    std::vector<GlucoseSample> samples_;
    std::int64_t interval_s_;
    std::string subject_id_;
    Scale scale_;
};

/// Model identities. Enumeration order is the tie-break order in reports.
enum class ModelId { DFS, AutoARIMA, BATS, TBATS, TimeGlu, Persistence };

std::string_view to_string(ModelId id);
ModelId model_id_from_string(std::string_view name);

/// Point predictions for the k steps after `origin_timestamp`.
struct Forecast {
    std::int64_t origin_timestamp = 0;
    std::int64_t interval_s = kDefaultIntervalSeconds;
    int horizon = 0;
    std::vector<double> values;
    ModelId model_id = ModelId::Persistence;
    bool flagged = false;  // e.g. clamped inverse transform or negative output

    Forecast() = default;
    Forecast(std::int64_t origin, std::int64_t interval, std::vector<double> vals, ModelId id);

    std::int64_t timestamp_at(int step) const { return origin_timestamp + interval_s * step; }
    bool operator==(const Forecast&) const = default;
};

/// Naive baseline: repeats the last observed value k times.
Forecast persistence_forecast(const TimeSeries& series, int k);

}  // namespace glucast
