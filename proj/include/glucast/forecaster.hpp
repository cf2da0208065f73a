#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include <json.hpp>

#include "glucast/arima.hpp"
#include "glucast/core.hpp"
#include "glucast/neural/timeglu.hpp"
#include "glucast/statespace.hpp"

namespace glucast {

struct DesParams {
    std::optional<double> alpha;  // unset: grid search on the training data
    std::optional<double> beta;
};

struct ArimaParams {
    bool automatic = true;
    int p = 1, d = 0, q = 0;  // used when !automatic
    arima::AutoArimaOptions search;
};

/// Shared by BATS and TBATS; the model id picks the seasonal representation.
struct BatsParams {
    statespace::BatsConfig config;
    bool select_arma = true;  // search ARMA orders up to the config's caps
};

struct TimeGluConfig {
    neural::TrainConfig train;
};

struct PersistenceParams {};

using ModelParams = std::variant<DesParams, ArimaParams, BatsParams, TimeGluConfig, PersistenceParams>;

struct ForecasterConfig {
    ModelId model_id = ModelId::Persistence;
    int horizon = 1;
    ModelParams params = PersistenceParams{};
    std::uint64_t seed = 0;
    std::string label;  // display name; defaults to the model id

    /// Defaults for a model id (BATS/TBATS get a daily period for 5-minute data).
    static ForecasterConfig defaults(ModelId id, std::int64_t interval_s = kDefaultIntervalSeconds);
    void validate() const;
    std::string display_name() const;
    nlohmann::json to_json() const;
    static ForecasterConfig from_json(const nlohmann::json& j);
    /// Short SHA-256 digest of to_json().
    std::string digest() const;
};

/**
 * Common contract: fit learns parameters from a training series; forecast
 * conditions on a history with those parameters and predicts k steps.
 * forecast(k) continues from the end of the training series.
 */
class Forecaster {
public:
    virtual ~Forecaster() = default;
    virtual ModelId id() const = 0;
    virtual void fit(const TimeSeries& train) = 0;
    virtual Forecast forecast(const TimeSeries& history, int k) const = 0;
    virtual Forecast forecast(int k) const = 0;
    /// Model-specific fitted state for the model file.
    virtual nlohmann::json state() const = 0;
    virtual void load_state(const nlohmann::json& state) = 0;
    /// Extra facts for the run manifest (e.g. searched grid size).
    virtual nlohmann::json summary() const { return nlohmann::json::object(); }
};

std::unique_ptr<Forecaster> make_forecaster(const ForecasterConfig& config);

/// Model file: {"format": "glucast-model", "version": 1, "config": ..., "state": ...}.
std::string save_model(const ForecasterConfig& config, const Forecaster& model);
std::pair<ForecasterConfig, std::unique_ptr<Forecaster>> load_model(const std::string& text);

}  // namespace glucast
