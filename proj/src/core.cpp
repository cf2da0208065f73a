#include "glucast/core.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace glucast {

bool is_valid_glucose(double value) noexcept {
    return std::isfinite(value) && value > 0.0 && value < kGlucoseCeiling;
}

TimeSeries::TimeSeries(std::vector<GlucoseSample> samples, std::int64_t interval_s, std::string subject_id,
                       Scale scale)
    : samples_(std::move(samples)), interval_s_(interval_s), subject_id_(std::move(subject_id)), scale_(scale) {
    if (samples_.empty()) throw DataError("empty input");
    if (interval_s_ <= 0) throw DataError("sampling interval must be positive");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        const double v = samples_[i].value;
        const bool ok = scale_ == Scale::MgDl ? is_valid_glucose(v) : std::isfinite(v);
        if (!ok) {
            throw DataError("glucose value out of range at index " + std::to_string(i) + ": " +
                            std::to_string(samples_[i].value));
        }
        if (i > 0 && samples_[i].timestamp - samples_[i - 1].timestamp != interval_s_) {
            throw DataError("timestamps not on a uniform " + std::to_string(interval_s_) +
                            " s grid at index " + std::to_string(i));
        }
    }
}

TimeSeries TimeSeries::from_values(const std::vector<double>& values, std::int64_t start, std::int64_t interval_s,
                                   std::string subject_id, Scale scale) {
    std::vector<GlucoseSample> samples;
    samples.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        samples.push_back({start + static_cast<std::int64_t>(i) * interval_s, values[i]});
    }
    return TimeSeries(std::move(samples), interval_s, std::move(subject_id), scale);
}

std::vector<double> TimeSeries::values() const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) out.push_back(s.value);
    return out;
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > samples_.size()) throw DataError("invalid slice range");
    return TimeSeries({samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                       samples_.begin() + static_cast<std::ptrdiff_t>(end)},
                      interval_s_, subject_id_, scale_);
}

TimeSeries TimeSeries::with_values(const std::vector<double>& values, Scale scale) const {
    if (values.size() != samples_.size()) throw DataError("value count does not match series length");
    auto samples = samples_;
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].value = values[i];
    return TimeSeries(std::move(samples), interval_s_, subject_id_, scale);
}

namespace {
constexpr std::array<std::pair<ModelId, std::string_view>, 6> kModelNames{{
    {ModelId::DFS, "DFS"},
    {ModelId::AutoARIMA, "AutoARIMA"},
    {ModelId::BATS, "BATS"},
    {ModelId::TBATS, "TBATS"},
    {ModelId::TimeGlu, "TimeGlu"},
    {ModelId::Persistence, "Persistence"},
}};
}  // namespace

std::string_view to_string(ModelId id) {
    for (const auto& [model, name] : kModelNames) {
        if (model == id) return name;
    }
    return "unknown";
}

ModelId model_id_from_string(std::string_view name) {
    for (const auto& [model, label] : kModelNames) {
        if (label == name) return model;
    }
    throw UsageError("unknown model id: " + std::string(name));
}

Forecast::Forecast(std::int64_t origin, std::int64_t interval, std::vector<double> vals, ModelId id)
    : origin_timestamp(origin),
      interval_s(interval),
      horizon(static_cast<int>(vals.size())),
      values(std::move(vals)),
      model_id(id) {
    if (horizon < 1) throw UsageError("forecast horizon must be >= 1");
    for (double v : values) {
        if (!std::isfinite(v)) throw FitError("non-finite forecast value from " + std::string(to_string(id)));
        if (v <= 0.0) flagged = true;
    }
}

Forecast persistence_forecast(const TimeSeries& series, int k) {
    if (series.size() == 0) throw DataError("empty input");
    if (k < 1) throw UsageError("forecast horizon must be >= 1");
    return Forecast(series.last_timestamp(), series.interval_s(),
                    std::vector<double>(static_cast<std::size_t>(k), series.last_value()), ModelId::Persistence);
}

}  // namespace glucast
