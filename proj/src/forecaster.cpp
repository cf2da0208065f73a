#include "glucast/forecaster.hpp"

#include "glucast/digest.hpp"
#include "glucast/ingest.hpp"
#include "glucast/smoothing.hpp"

namespace glucast {

using nlohmann::json;

namespace {

json train_to_json(const neural::TrainConfig& t) {
    const auto& a = t.arch;
    return {{"window", a.window},
            {"encoder_layers", a.encoder_layers},
            {"encoder_hidden", a.encoder_hidden},
            {"attn_dim", a.attn_dim},
            {"decoder_hidden", a.decoder_hidden},
            {"encoder_bidirectional", a.encoder_bidirectional},
            {"decoder_bidirectional", a.decoder_bidirectional},
            {"use_attention", a.use_attention},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"epsilon", t.epsilon},
            {"noise_sigma", t.noise_sigma},
            {"patience", t.patience}};
}

neural::TrainConfig train_from_json(const json& j) {
    neural::TrainConfig t;
    auto& a = t.arch;
    a.window = j.value("window", a.window);
    a.encoder_layers = j.value("encoder_layers", a.encoder_layers);
    a.encoder_hidden = j.value("encoder_hidden", a.encoder_hidden);
    a.attn_dim = j.value("attn_dim", a.attn_dim);
    a.decoder_hidden = j.value("decoder_hidden", a.decoder_hidden);
    a.encoder_bidirectional = j.value("encoder_bidirectional", a.encoder_bidirectional);
    a.decoder_bidirectional = j.value("decoder_bidirectional", a.decoder_bidirectional);
    a.use_attention = j.value("use_attention", a.use_attention);
    t.epochs = j.value("epochs", t.epochs);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.learning_rate = j.value("learning_rate", t.learning_rate);
    t.beta1 = j.value("beta1", t.beta1);
    t.beta2 = j.value("beta2", t.beta2);
    t.epsilon = j.value("epsilon", t.epsilon);
    t.noise_sigma = j.value("noise_sigma", t.noise_sigma);
    t.patience = j.value("patience", t.patience);
    return t;
}

json bats_config_to_json(const statespace::BatsConfig& c) {
    return {{"use_box_cox", c.use_box_cox},     {"use_trend", c.use_trend},
            {"use_damping", c.use_damping},     {"arma_p", c.arma_p},
            {"arma_q", c.arma_q},               {"seasonal_periods", c.seasonal_periods},
            {"harmonics", c.harmonics}};
}

statespace::BatsConfig bats_config_from_json(const json& j) {
    statespace::BatsConfig c;
    c.use_box_cox = j.value("use_box_cox", c.use_box_cox);
    c.use_trend = j.value("use_trend", c.use_trend);
    c.use_damping = j.value("use_damping", c.use_damping);
    c.arma_p = j.value("arma_p", c.arma_p);
    c.arma_q = j.value("arma_q", c.arma_q);
    c.seasonal_periods = j.value("seasonal_periods", c.seasonal_periods);
    c.harmonics = j.value("harmonics", c.harmonics);
    return c;
}

json params_to_json(const ModelParams& params) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, DesParams>) {
                json j = json::object();
                j["alpha"] = p.alpha ? json(*p.alpha) : json(nullptr);
                j["beta"] = p.beta ? json(*p.beta) : json(nullptr);
                return j;
            } else if constexpr (std::is_same_v<T, ArimaParams>) {
                return {{"automatic", p.automatic}, {"p", p.p},   {"d", p.d}, {"q", p.q},
                        {"max_p", p.search.max_p},  {"max_d", p.search.max_d}, {"max_q", p.search.max_q}};
            } else if constexpr (std::is_same_v<T, BatsParams>) {
                json j = bats_config_to_json(p.config);
                j["select_arma"] = p.select_arma;
                return j;
            } else if constexpr (std::is_same_v<T, TimeGluConfig>) {
                return train_to_json(p.train);
            } else {
                return json::object();
            }
        },
        params);
}

ModelParams params_from_json(ModelId id, const json& j) {
    switch (id) {
        case ModelId::DFS: {
            DesParams p;
            if (j.contains("alpha") && !j["alpha"].is_null()) p.alpha = j["alpha"].get<double>();
            if (j.contains("beta") && !j["beta"].is_null()) p.beta = j["beta"].get<double>();
            return p;
        }
        case ModelId::AutoARIMA: {
            ArimaParams p;
            p.automatic = j.value("automatic", true);
            p.p = j.value("p", p.p);
            p.d = j.value("d", p.d);
            p.q = j.value("q", p.q);
            p.search.max_p = j.value("max_p", p.search.max_p);
            p.search.max_d = j.value("max_d", p.search.max_d);
            p.search.max_q = j.value("max_q", p.search.max_q);
            return p;
        }
        case ModelId::BATS:
        case ModelId::TBATS: {
            BatsParams p;
            p.config = bats_config_from_json(j);
            p.select_arma = j.value("select_arma", true);
            return p;
        }
        case ModelId::TimeGlu:
            return TimeGluConfig{train_from_json(j)};
        case ModelId::Persistence:
            break;
    }
    return PersistenceParams{};
}

class PersistenceModel final : public Forecaster {
public:
    ModelId id() const override { return ModelId::Persistence; }
    void fit(const TimeSeries& train) override { last_ = train; }
    Forecast forecast(const TimeSeries& history, int k) const override { return persistence_forecast(history, k); }
    Forecast forecast(int k) const override {
        if (!last_) throw FitError("model not fitted");
        return persistence_forecast(*last_, k);
    }
    json state() const override {
        if (!last_) return json::object();
        return {{"timestamp", last_->last_timestamp()},
                {"value", last_->last_value()},
                {"interval_s", last_->interval_s()}};
    }
    void load_state(const json& s) override {
        last_ = TimeSeries({{s.at("timestamp").get<std::int64_t>(), s.at("value").get<double>()}},
                           s.at("interval_s").get<std::int64_t>());
    }

private:
    std::optional<TimeSeries> last_;
};

class DesModel final : public Forecaster {
public:
    explicit DesModel(DesParams p) : params_(p) {}
    ModelId id() const override { return ModelId::DFS; }
    void fit(const TimeSeries& train) override {
        double a = 0.0, b = 0.0;
        if (params_.alpha && params_.beta) {
            a = *params_.alpha;
            b = *params_.beta;
        } else {
            std::tie(a, b) = smoothing::des_grid_search(train);
            if (params_.alpha) a = *params_.alpha;
            if (params_.beta) b = *params_.beta;
        }
        state_ = smoothing::des_fit(train, a, b);
    }
    Forecast forecast(const TimeSeries& history, int k) const override {
        return smoothing::des_forecast(smoothing::des_fit(history, fitted().alpha, fitted().beta), k);
    }
    Forecast forecast(int k) const override { return smoothing::des_forecast(fitted(), k); }
    json state() const override {
        const auto& s = fitted();
        return {{"alpha", s.alpha}, {"beta", s.beta}, {"level", s.level}, {"trend", s.trend},
                {"last_timestamp", s.last_timestamp}, {"interval_s", s.interval_s}};
    }
    void load_state(const json& j) override {
        smoothing::DesState s;
        s.alpha = j.at("alpha").get<double>();
        s.beta = j.at("beta").get<double>();
        s.level = j.at("level").get<double>();
        s.trend = j.at("trend").get<double>();
        s.last_timestamp = j.at("last_timestamp").get<std::int64_t>();
        s.interval_s = j.at("interval_s").get<std::int64_t>();
        state_ = s;
    }

private:
    const smoothing::DesState& fitted() const {
        if (!state_) throw FitError("model not fitted");
        return *state_;
    }
    DesParams params_;
    std::optional<smoothing::DesState> state_;
};

class ArimaForecaster final : public Forecaster {
public:
    explicit ArimaForecaster(ArimaParams p) : params_(p) {}
    ModelId id() const override { return ModelId::AutoARIMA; }
    void fit(const TimeSeries& train) override {
        if (params_.automatic) {
            auto res = arima::auto_arima_search(train.values(), params_.search);
            grid_size_ = res.candidates.size();
            model_ = res.best;
        } else {
            model_ = arima::fit_arima(train, params_.p, params_.d, params_.q);
            grid_size_ = 1;
        }
        tail_ = train;
    }
    Forecast forecast(const TimeSeries& history, int k) const override {
        return arima::forecast_arima(fitted(), history, k);
    }
    Forecast forecast(int k) const override {
        if (!tail_) throw FitError("model not fitted");
        return arima::forecast_arima(fitted(), *tail_, k);
    }
    json state() const override {
        const auto& m = fitted();
        // Enough trailing history to forecast from the end of training.
        const std::size_t keep = std::min<std::size_t>(tail_->size(), 64 + static_cast<std::size_t>(m.p + m.q + m.d));
        const auto tail = tail_->slice(tail_->size() - keep, tail_->size());
        return {{"p", m.p}, {"d", m.d}, {"q", m.q}, {"phi", m.phi}, {"theta", m.theta}, {"delta", m.delta},
                {"sigma2", m.sigma2}, {"aic", m.aic}, {"bic", m.bic}, {"n_effective", m.n_effective},
                {"stationary", m.stationary}, {"invertible", m.invertible}, {"converged", m.converged},
                {"tail_start", tail.timestamp(0)}, {"interval_s", tail.interval_s()}, {"tail", tail.values()}};
    }
    void load_state(const json& j) override {
        arima::ArimaModel m;
        m.p = j.at("p").get<int>();
        m.d = j.at("d").get<int>();
        m.q = j.at("q").get<int>();
        m.phi = j.at("phi").get<std::vector<double>>();
        m.theta = j.at("theta").get<std::vector<double>>();
        m.delta = j.at("delta").get<double>();
        m.sigma2 = j.at("sigma2").get<double>();
        m.aic = j.at("aic").get<double>();
        m.bic = j.at("bic").get<double>();
        m.n_effective = j.at("n_effective").get<int>();
        m.stationary = j.value("stationary", true);
        m.invertible = j.value("invertible", true);
        m.converged = j.value("converged", true);
        model_ = m;
        tail_ = TimeSeries::from_values(j.at("tail").get<std::vector<double>>(), j.at("tail_start").get<std::int64_t>(),
                                        j.at("interval_s").get<std::int64_t>());
    }
    json summary() const override {
        const auto& m = fitted();
        return {{"selected_order", {m.p, m.d, m.q}},
                {"searched_grid_size", grid_size_},
                {"aic", m.aic},
                {"bic", m.bic}};
    }

private:
    const arima::ArimaModel& fitted() const {
        if (!model_) throw FitError("model not fitted");
        return *model_;
    }
    ArimaParams params_;
    std::optional<arima::ArimaModel> model_;
    std::optional<TimeSeries> tail_;
    std::size_t grid_size_ = 0;
};

class BatsForecaster final : public Forecaster {
public:
    BatsForecaster(BatsParams p, bool trig) : params_(std::move(p)), trig_(trig) {}
    ModelId id() const override { return trig_ ? ModelId::TBATS : ModelId::BATS; }
    void fit(const TimeSeries& train) override {
        if (params_.select_arma) {
            model_ = statespace::fit_select_arma(train, params_.config, trig_);
        } else {
            model_ = trig_ ? statespace::tbats_fit(train, params_.config) : statespace::bats_fit(train, params_.config);
        }
    }
    Forecast forecast(const TimeSeries& history, int k) const override {
        return statespace::forecast_bats(statespace::condition(fitted(), history), k);
    }
    Forecast forecast(int k) const override { return statespace::forecast_bats(fitted(), k); }
    json state() const override {
        const auto& m = fitted();
        return {{"config", bats_config_to_json(m.config)},
                {"trigonometric", m.trigonometric},
                {"lambda", m.lambda},
                {"alpha", m.alpha},
                {"beta", m.beta},
                {"damping", m.damping},
                {"gamma1", m.gamma1},
                {"gamma2", m.gamma2},
                {"ar", m.ar},
                {"ma", m.ma},
                {"level", m.level},
                {"trend", m.trend},
                {"seasonal", m.seasonal},
                {"past_d", m.past_d},
                {"past_e", m.past_e},
                {"sse", m.sse},
                {"aic", m.aic},
                {"n_effective", m.n_effective},
                {"last_timestamp", m.last_timestamp},
                {"interval_s", m.interval_s}};
    }
    void load_state(const json& j) override {
        statespace::BatsModel m;
        m.config = bats_config_from_json(j.at("config"));
        m.trigonometric = j.at("trigonometric").get<bool>();
        m.lambda = j.at("lambda").get<double>();
        m.alpha = j.at("alpha").get<double>();
        m.beta = j.at("beta").get<double>();
        m.damping = j.at("damping").get<double>();
        m.gamma1 = j.at("gamma1").get<std::vector<double>>();
        m.gamma2 = j.at("gamma2").get<std::vector<double>>();
        m.ar = j.at("ar").get<std::vector<double>>();
        m.ma = j.at("ma").get<std::vector<double>>();
        m.level = j.at("level").get<double>();
        m.trend = j.at("trend").get<double>();
        m.seasonal = j.at("seasonal").get<std::vector<std::vector<double>>>();
        m.past_d = j.at("past_d").get<std::vector<double>>();
        m.past_e = j.at("past_e").get<std::vector<double>>();
        m.sse = j.at("sse").get<double>();
        m.aic = j.at("aic").get<double>();
        m.n_effective = j.at("n_effective").get<int>();
        m.last_timestamp = j.at("last_timestamp").get<std::int64_t>();
        m.interval_s = j.at("interval_s").get<std::int64_t>();
        model_ = std::move(m);
    }
    json summary() const override {
        const auto& m = fitted();
        return {{"arma_order", {m.ar.size(), m.ma.size()}}, {"lambda", m.lambda}, {"aic", m.aic},
                {"state_dimension", m.state_dimension()}};
    }

private:
    const statespace::BatsModel& fitted() const {
        if (!model_) throw FitError("model not fitted");
        return *model_;
    }
    BatsParams params_;
    bool trig_;
    std::optional<statespace::BatsModel> model_;
};

class TimeGluForecaster final : public Forecaster {
public:
    TimeGluForecaster(TimeGluConfig c, std::uint64_t seed) : config_(std::move(c)) { config_.train.seed = seed; }
    ModelId id() const override { return ModelId::TimeGlu; }
    void fit(const TimeSeries& train) override {
        auto [z, st] = ingest::standardize(train);
        auto res = neural::train(z, config_.train);
        params_ = std::move(res.params);
        log_ = std::move(res.log);
        standardization_ = st;
        tail_ = train.slice(train.size() - std::min(train.size(), config_.train.arch.window), train.size());
    }
    Forecast forecast(const TimeSeries& history, int k) const override {
        return neural::predict_timeglu(fitted(), history, standardization_, k);
    }
    Forecast forecast(int k) const override {
        if (!tail_) throw FitError("model not fitted");
        return neural::predict_timeglu(fitted(), *tail_, standardization_, k);
    }
    json state() const override {
        return {{"standardization", {{"mean", standardization_.mean}, {"std", standardization_.std}}},
                {"tail_start", tail_->timestamp(0)},
                {"interval_s", tail_->interval_s()},
                {"tail", tail_->values()},
                {"params", json::parse(neural::serialize_params(fitted()))}};
    }
    void load_state(const json& j) override {
        standardization_ = {j.at("standardization").at("mean").get<double>(),
                            j.at("standardization").at("std").get<double>()};
        tail_ = TimeSeries::from_values(j.at("tail").get<std::vector<double>>(), j.at("tail_start").get<std::int64_t>(),
                                        j.at("interval_s").get<std::int64_t>());
        params_ = neural::deserialize_params(j.at("params").dump());
    }
    json summary() const override {
        return {{"epochs_run", log_.epoch_loss.size()}, {"best_epoch", log_.best_epoch + 1},
                {"early_stopped", log_.early_stopped}, {"epoch_loss", log_.epoch_loss}};
    }

private:
    const neural::TimeGluParams& fitted() const {
        if (!params_) throw FitError("model not fitted");
        return *params_;
    }
    TimeGluConfig config_;
    std::optional<neural::TimeGluParams> params_;
    neural::TrainLog log_;
    ingest::Standardization standardization_;
    std::optional<TimeSeries> tail_;
};

}  // namespace

ForecasterConfig ForecasterConfig::defaults(ModelId id, std::int64_t interval_s) {
    ForecasterConfig c;
    c.model_id = id;
    const int daily = static_cast<int>(86400 / std::max<std::int64_t>(1, interval_s));
    switch (id) {
        case ModelId::DFS:
            c.params = DesParams{};
            break;
        case ModelId::AutoARIMA:
            c.params = ArimaParams{};
            break;
        case ModelId::BATS: {
            BatsParams p;
            p.config.seasonal_periods = {daily};
            p.config.arma_p = 1;
            p.config.arma_q = 1;
            c.params = p;
            break;
        }
        case ModelId::TBATS: {
            BatsParams p;
            p.config.seasonal_periods = {daily};
            p.config.harmonics = {std::min(3, daily / 2)};
            p.config.arma_p = 1;
            p.config.arma_q = 1;
            c.params = p;
            break;
        }
        case ModelId::TimeGlu:
            c.params = TimeGluConfig{};
            break;
        case ModelId::Persistence:
            c.params = PersistenceParams{};
            break;
    }
    return c;
}

void ForecasterConfig::validate() const {
    if (horizon < 1) throw UsageError("horizon must be >= 1");
    const bool ok = std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            switch (model_id) {
                case ModelId::DFS: return std::is_same_v<T, DesParams>;
                case ModelId::AutoARIMA: return std::is_same_v<T, ArimaParams>;
                case ModelId::BATS:
                case ModelId::TBATS: return std::is_same_v<T, BatsParams>;
                case ModelId::TimeGlu: return std::is_same_v<T, TimeGluConfig>;
                case ModelId::Persistence: return std::is_same_v<T, PersistenceParams>;
            }
            return false;
        },
        params);
    if (!ok) throw UsageError("parameter block does not match model " + std::string(to_string(model_id)));
    if (const auto* b = std::get_if<BatsParams>(&params)) b->config.validate(model_id == ModelId::TBATS);
    if (const auto* t = std::get_if<TimeGluConfig>(&params)) t->train.validate();
}

std::string ForecasterConfig::display_name() const { return label.empty() ? std::string(to_string(model_id)) : label; }

json ForecasterConfig::to_json() const {
    return {{"model_id", std::string(to_string(model_id))},
            {"label", display_name()},
            {"horizon", horizon},
            {"seed", seed},
            {"params", params_to_json(params)}};
}

ForecasterConfig ForecasterConfig::from_json(const json& j) {
    ForecasterConfig c;
    c.model_id = model_id_from_string(j.at("model_id").get<std::string>());
    c.horizon = j.value("horizon", 1);
    c.seed = j.value("seed", std::uint64_t{0});
    c.label = j.value("label", std::string{});
    if (c.label == to_string(c.model_id)) c.label.clear();
    c.params = params_from_json(c.model_id, j.value("params", json::object()));
    c.validate();
    return c;
}

std::string ForecasterConfig::digest() const { return sha256_hex(to_json().dump()).substr(0, 16); }

std::unique_ptr<Forecaster> make_forecaster(const ForecasterConfig& config) {
    config.validate();
    switch (config.model_id) {
        case ModelId::DFS: return std::make_unique<DesModel>(std::get<DesParams>(config.params));
        case ModelId::AutoARIMA: return std::make_unique<ArimaForecaster>(std::get<ArimaParams>(config.params));
        case ModelId::BATS: return std::make_unique<BatsForecaster>(std::get<BatsParams>(config.params), false);
        case ModelId::TBATS: return std::make_unique<BatsForecaster>(std::get<BatsParams>(config.params), true);
        case ModelId::TimeGlu:
            return std::make_unique<TimeGluForecaster>(std::get<TimeGluConfig>(config.params), config.seed);
        case ModelId::Persistence: return std::make_unique<PersistenceModel>();
    }
    throw UsageError("unknown model");
}

std::string save_model(const ForecasterConfig& config, const Forecaster& model) {
    json j = {{"format", "glucast-model"}, {"version", 1}, {"config", config.to_json()}, {"state", model.state()}};
    return j.dump(1);
}

std::pair<ForecasterConfig, std::unique_ptr<Forecaster>> load_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
    if (j.value("format", "") != "glucast-model") throw DataError("not a glucast model file");
    if (j.value("version", 0) != 1) throw DataError("unsupported model file version");
    auto config = ForecasterConfig::from_json(j.at("config"));
    auto model = make_forecaster(config);
    try {
        model->load_state(j.at("state"));
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed model state: ") + e.what());
    }
    return {std::move(config), std::move(model)};
}

}  // namespace glucast
