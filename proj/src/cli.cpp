#include "glucast/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "glucast/digest.hpp"
#include "glucast/eval.hpp"
#include "glucast/plot.hpp"
#include "glucast/synth.hpp"

namespace glucast::cli {

using nlohmann::json;

namespace {

struct ModelOptions {
    std::optional<double> alpha, beta;
    std::vector<int> order;
    int max_p = 5, max_d = 2, max_q = 5;
    std::vector<int> periods, harmonics;
    int arma_p = 1, arma_q = 1;
    bool no_arma_search = false;
    bool no_box_cox = false;
    bool no_trend = false;
    bool damping = false;
    std::size_t window = 24, layers = 2, hidden = 32, attn_dim = 32, decoder_hidden = 32;
    int epochs = 100;
    std::size_t batch = 32;
    double learning_rate = 1e-3;
    double noise = 0.05;
    int patience = 10;
    bool lstm_encoder = false, lstm_decoder = false, no_attention = false;
};

struct ProtocolOptions {
    double train_fraction = 0.8;
    int horizon = 1;
    int stride = 1;
    std::string refit = "once";

    eval::BacktestProtocol resolve() const {
        eval::BacktestProtocol p;
        p.train_fraction = train_fraction;
        p.horizon = horizon;
        p.stride = stride;
        p.refit = eval::refit_policy_from_string(refit);
        p.validate();
        return p;
    }
};

void add_input_options(CLI::App* cmd, InputOptions& in, bool required = true) {
    auto* opt = cmd->add_option("-i,--input", in.path, "CGM CSV file");
    if (required) opt->required();
    cmd->add_option("--preset", in.preset, "CSV layout: generic, cgm-glucose, colas")->capture_default_str();
    cmd->add_option("--subject", in.subject, "Subject id for multi-subject files (default: first)");
    cmd->add_option("--time-format", in.time_format, "Timestamp column: iso (ISO-8601) or epoch (seconds)")
        ->check(CLI::IsMember({"iso", "epoch"}))
        ->capture_default_str();
    cmd->add_option("--interval", in.interval_s, "Sampling interval in seconds")->capture_default_str();
    cmd->add_option("--max-gap", in.max_gap_s, "Largest gap (s) bridged by interpolation")->capture_default_str();
}

void add_model_options(CLI::App* cmd, ModelOptions& m) {
    const std::string des = "DFS", arima = "AutoARIMA", bats = "BATS/TBATS", nn = "TimeGlu";
    cmd->add_option("--alpha", m.alpha, "DES level gain (default: grid search)")->group(des);
    cmd->add_option("--beta", m.beta, "DES trend gain (default: grid search)")->group(des);
    cmd->add_option("--order", m.order, "Fixed ARIMA order p,d,q (default: automatic)")
        ->delimiter(',')
        ->expected(3)
        ->group(arima);
    cmd->add_option("--max-p", m.max_p, "Largest AR order searched")->capture_default_str()->group(arima);
    cmd->add_option("--max-d", m.max_d, "Largest differencing order")->capture_default_str()->group(arima);
    cmd->add_option("--max-q", m.max_q, "Largest MA order searched")->capture_default_str()->group(arima);
    cmd->add_option("--periods", m.periods, "Seasonal periods in steps (default: one day)")
        ->delimiter(',')
        ->group(bats);
    cmd->add_option("--harmonics", m.harmonics, "TBATS harmonics per period (default: 3)")
        ->delimiter(',')
        ->group(bats);
    cmd->add_option("--arma-p", m.arma_p, "Largest ARMA p on the errors")->capture_default_str()->group(bats);
    cmd->add_option("--arma-q", m.arma_q, "Largest ARMA q on the errors")->capture_default_str()->group(bats);
    cmd->add_flag("--no-arma-search", m.no_arma_search, "Use exactly --arma-p/--arma-q")->group(bats);
    cmd->add_flag("--no-box-cox", m.no_box_cox, "Disable the Box-Cox transform")->group(bats);
    cmd->add_flag("--no-trend", m.no_trend, "Drop the trend component")->group(bats);
    cmd->add_flag("--damping", m.damping, "Damp the trend")->group(bats);
    cmd->add_option("--window", m.window, "Input window length")->capture_default_str()->group(nn);
    cmd->add_option("--layers", m.layers, "Encoder layers")->capture_default_str()->group(nn);
    cmd->add_option("--hidden", m.hidden, "Encoder hidden size")->capture_default_str()->group(nn);
    cmd->add_option("--attn-dim", m.attn_dim, "Attention projection size")->capture_default_str()->group(nn);
    cmd->add_option("--decoder-hidden", m.decoder_hidden, "Decoder hidden size")->capture_default_str()->group(nn);
    cmd->add_option("--epochs", m.epochs, "Maximum epochs")->capture_default_str()->group(nn);
    cmd->add_option("--batch", m.batch, "Mini-batch size")->capture_default_str()->group(nn);
    cmd->add_option("--lr", m.learning_rate, "Adam learning rate")->capture_default_str()->group(nn);
    cmd->add_option("--noise", m.noise, "Input noise sigma (standardized units)")->capture_default_str()->group(nn);
    cmd->add_option("--patience", m.patience, "Early-stopping patience in epochs")->capture_default_str()->group(nn);
    cmd->add_flag("--lstm-encoder", m.lstm_encoder, "Unidirectional encoder")->group(nn);
    cmd->add_flag("--lstm-decoder", m.lstm_decoder, "Unidirectional decoder")->group(nn);
    cmd->add_flag("--no-attention", m.no_attention, "Remove the attention block")->group(nn);
}

void add_protocol_options(CLI::App* cmd, ProtocolOptions& p) {
    cmd->add_option("--train-fraction", p.train_fraction, "Share of the series before the first origin")
        ->capture_default_str();
    cmd->add_option("-k,--horizon", p.horizon, "Forecast horizon in steps")->capture_default_str();
    cmd->add_option("--stride", p.stride, "Steps between forecast origins")->capture_default_str();
    cmd->add_option("--refit", p.refit, "once or every-origin")->capture_default_str();
}

ForecasterConfig build_config(ModelId id, const ModelOptions& m, std::int64_t interval_s, int horizon,
                              std::uint64_t seed) {
    auto c = ForecasterConfig::defaults(id, interval_s);
    c.horizon = horizon;
    c.seed = seed;
    if (auto* p = std::get_if<DesParams>(&c.params)) {
        p->alpha = m.alpha;
        p->beta = m.beta;
    } else if (auto* p = std::get_if<ArimaParams>(&c.params)) {
        if (!m.order.empty()) {
            p->automatic = false;
            p->p = m.order[0];
            p->d = m.order[1];
            p->q = m.order[2];
        }
        p->search.max_p = m.max_p;
        p->search.max_d = m.max_d;
        p->search.max_q = m.max_q;
    } else if (auto* p = std::get_if<BatsParams>(&c.params)) {
        if (!m.periods.empty()) p->config.seasonal_periods = m.periods;
        if (id == ModelId::TBATS) {
            if (!m.harmonics.empty()) {
                p->config.harmonics = m.harmonics;
            } else {
                p->config.harmonics.clear();
                for (int period : p->config.seasonal_periods) p->config.harmonics.push_back(std::min(3, period / 2));
            }
        }
        p->config.arma_p = m.arma_p;
        p->config.arma_q = m.arma_q;
        p->select_arma = !m.no_arma_search;
        p->config.use_box_cox = !m.no_box_cox;
        p->config.use_trend = !m.no_trend;
        p->config.use_damping = m.damping;
    } else if (auto* p = std::get_if<TimeGluConfig>(&c.params)) {
        auto& t = p->train;
        t.arch.window = m.window;
        t.arch.encoder_layers = m.layers;
        t.arch.encoder_hidden = m.hidden;
        t.arch.attn_dim = m.attn_dim;
        t.arch.decoder_hidden = m.decoder_hidden;
        t.arch.encoder_bidirectional = !m.lstm_encoder;
        t.arch.decoder_bidirectional = !m.lstm_decoder;
        t.arch.use_attention = !m.no_attention;
        t.epochs = m.epochs;
        t.batch_size = m.batch;
        t.learning_rate = m.learning_rate;
        t.noise_sigma = m.noise;
        t.patience = m.patience;
    }
    c.validate();
    return c;
}

std::string now_iso() {
    const auto now = std::chrono::system_clock::now();
    return ingest::format_iso8601(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
}

/// One manifest per run: what was asked, what was read, what was written.
class Manifest {
public:
    Manifest(std::string command, const std::vector<std::string>& args) : started_(now_iso()) {
        doc_ = {{"format", "glucast-manifest"},
                {"version", 1},
                {"tool_version", kToolVersion},
                {"command", std::move(command)},
                {"arguments", args},
                {"inputs", json::array()},
                {"outputs", json::array()}};
    }
    void input(const std::string& path, const std::string& bytes) {
        doc_["inputs"].push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
    }
    void output(const std::string& path) { doc_["outputs"].push_back(path); }
    json& operator[](const char* key) { return doc_[key]; }
    void write(const std::string& path) {
        doc_["started_at"] = started_;
        doc_["finished_at"] = now_iso();
        plot::write_file(path, doc_.dump(2) + "\n");
    }

private:
    std::string started_;
    json doc_;
};

std::string manifest_path(const std::string& explicit_path, const std::string& out, const std::string& command) {
    if (!explicit_path.empty()) return explicit_path;
    if (!out.empty()) return out + ".manifest.json";
    return "glucast-" + command + ".manifest.json";
}

std::string read_input(const InputOptions& in, Manifest& manifest) {
    std::string text = ingest::read_file(in.path);
    manifest.input(in.path, text);
    return text;
}

std::vector<GlucoseSample> samples_from_text(const std::string& text, const InputOptions& in) {
    auto schema = ingest::schema_preset(in.preset);
    if (in.time_format == "epoch") schema.timestamp_format = ingest::TimestampFormat::EpochSeconds;
    if (schema.subject_column.empty()) {
        if (!in.subject.empty()) throw UsageError("--subject needs a preset with a subject column");
        return ingest::parse_csv(text, schema);
    }
    auto groups = ingest::parse_csv_by_subject(text, schema);
    if (groups.empty()) throw DataError(in.path + ": no samples");
    if (in.subject.empty()) return groups.begin()->second;
    auto it = groups.find(in.subject);
    if (it == groups.end()) throw DataError(in.path + ": no subject '" + in.subject + "'");
    return it->second;
}

TimeSeries series_from_text(const std::string& text, const InputOptions& in) {
    const auto samples = samples_from_text(text, in);
    if (samples.empty()) throw DataError(in.path + ": no samples");
    const auto segments = ingest::regularize(samples, in.interval_s, {in.max_gap_s, ingest::OnLargerGap::SplitSegments},
                                             in.subject);
    return ingest::longest_segment(segments);
}

template <typename Fn>
auto with_file_context(const std::string& path, Fn&& fn) {
    try {
        return fn();
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string sanitize(const std::string& label) {
    std::string out;
    for (char c : label) out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '-';
    return out;
}

// ---------------------------------------------------------------- stats

struct StatsOptions {
    InputOptions input;
    double lo = 70.0, hi = 180.0;
    std::string out, svg, manifest;
};

int cmd_stats(const StatsOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    Manifest manifest("stats", args);
    const std::string text = read_input(o.input, manifest);
    const auto samples = with_file_context(o.input.path, [&] { return samples_from_text(text, o.input); });
    if (samples.empty()) throw DataError(o.input.path + ": no samples");

    double sum = 0.0, mn = samples.front().value, mx = mn;
    for (const auto& s : samples) {
        sum += s.value;
        mn = std::min(mn, s.value);
        mx = std::max(mx, s.value);
    }
    const double n = static_cast<double>(samples.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& s : samples) ss += (s.value - mean) * (s.value - mean);
    const double sd = std::sqrt(ss / n);
    const auto rs = eval::range_stats(samples, o.lo, o.hi);

    out << "samples      " << samples.size() << '\n'
        << "time range   " << ingest::format_iso8601(samples.front().timestamp) << " to "
        << ingest::format_iso8601(samples.back().timestamp) << '\n'
        << "glucose      " << fmt("%.1f", mean) << " ± " << fmt("%.1f", sd) << " mg/dL\n"
        << "range        " << fmt("%.1f", mn) << " - " << fmt("%.1f", mx) << " mg/dL\n"
        << "TIR/TAR/TBR  " << fmt("%.3f", rs.tir) << " / " << fmt("%.3f", rs.tar) << " / " << fmt("%.3f", rs.tbr)
        << "  (" << fmt("%g", o.lo) << "-" << fmt("%g", o.hi) << " mg/dL)\n";

    json days = json::array();
    for (const auto& d : rs.days) {
        days.push_back({{"date", ingest::format_iso8601(d.day_start).substr(0, 10)},
                        {"count", d.count},
                        {"min", d.min},
                        {"median", d.median},
                        {"max", d.max}});
    }
    json summary = {{"format", "glucast-stats"},
                    {"version", 1},
                    {"n", samples.size()},
                    {"first_timestamp", ingest::format_iso8601(samples.front().timestamp)},
                    {"last_timestamp", ingest::format_iso8601(samples.back().timestamp)},
                    {"mean", mean},
                    {"std", sd},
                    {"min", mn},
                    {"max", mx},
                    {"lo", o.lo},
                    {"hi", o.hi},
                    {"tir", rs.tir},
                    {"tar", rs.tar},
                    {"tbr", rs.tbr},
                    {"days", days}};
    if (!o.out.empty()) {
        plot::write_file(o.out, summary.dump(2) + "\n");
        manifest.output(o.out);
    }
    if (!o.svg.empty()) {
        // Hour-of-day profile: min, median and max per hour plus the range thresholds.
        std::vector<std::vector<double>> by_hour(24);
        for (const auto& s : samples) {
            by_hour[static_cast<std::size_t>(((s.timestamp % 86400) + 86400) % 86400 / 3600)].push_back(s.value);
        }
        plot::Series lo_s{"min", {}, {}, "#1f77b4"}, med_s{"median", {}, {}, "#000000"}, hi_s{"max", {}, {}, "#d62728"};
        for (std::size_t h = 0; h < 24; ++h) {
            auto v = by_hour[h];
            if (v.empty()) continue;
            std::sort(v.begin(), v.end());
            const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
            for (auto* s : {&lo_s, &med_s, &hi_s}) s->x.push_back(static_cast<double>(h));
            lo_s.y.push_back(v.front());
            med_s.y.push_back(med);
            hi_s.y.push_back(v.back());
        }
        plot::Chart chart{"Daily glucose profile", "hour of day (UTC)", "glucose (mg/dL)",
                          {lo_s, med_s, hi_s,
                           {"low threshold", {0, 23}, {o.lo, o.lo}, "#999999"},
                           {"high threshold", {0, 23}, {o.hi, o.hi}, "#999999"}}};
        plot::write_file(o.svg, plot::to_svg(chart));
        manifest.output(o.svg);
    }
    manifest["config"] = {{"input", o.input.path}, {"preset", o.input.preset}, {"time_format", o.input.time_format},
                          {"subject", o.input.subject}, {"lo", o.lo}, {"hi", o.hi}};
    manifest["summary"] = summary;
    manifest.write(manifest_path(o.manifest, o.out, "stats"));
    return 0;
}

// ---------------------------------------------------------------- fit

struct FitOptions {
    InputOptions input;
    std::string model = "des";
    ModelOptions m;
    std::uint64_t seed = 0;
    double train_fraction = 1.0;
    std::string out, log, manifest;
};

int cmd_fit(const FitOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    Manifest manifest("fit", args);
    const ModelId id = parse_model_name(o.model);
    if (!(o.train_fraction > 0.0 && o.train_fraction <= 1.0)) throw UsageError("--train-fraction must lie in (0, 1]");
    if (!o.log.empty() && id != ModelId::TimeGlu) throw UsageError("--log is only available for timeglu");
    const std::string text = read_input(o.input, manifest);
    auto series = with_file_context(o.input.path, [&] { return series_from_text(text, o.input); });
    if (o.train_fraction < 1.0) series = ingest::split(series, o.train_fraction).first;
    const auto config = build_config(id, o.m, series.interval_s(), 1, o.seed);
    auto model = make_forecaster(config);
    model->fit(series);
    plot::write_file(o.out, save_model(config, *model));
    manifest.output(o.out);
    json summary = model->summary();
    if (!o.log.empty()) {
        std::string csv = "epoch,loss\n";
        const auto losses = summary["epoch_loss"].get<std::vector<double>>();
        for (std::size_t e = 0; e < losses.size(); ++e) {
            csv += std::to_string(e + 1) + "," + fmt("%.17g", losses[e]) + "\n";
        }
        plot::write_file(o.log, csv);
        manifest.output(o.log);
    }
    summary.erase("epoch_loss");
    out << "fitted " << config.display_name() << " on " << series.size() << " points -> " << o.out << '\n';
    if (!summary.empty()) out << summary.dump() << '\n';
    manifest["config"] = {{"input", o.input.path},
                          {"preset", o.input.preset},
                          {"time_format", o.input.time_format},
                          {"interval_s", o.input.interval_s},
                          {"max_gap_s", o.input.max_gap_s},
                          {"train_fraction", o.train_fraction},
                          {"model", config.to_json()}};
    manifest["seed"] = o.seed;
    manifest["dataset_digest"] = series_digest(series);
    manifest["summary"] = summary;
    manifest.write(manifest_path(o.manifest, o.out, "fit"));
    return 0;
}

// ---------------------------------------------------------------- forecast

struct ForecastOptions {
    std::string model_file;
    InputOptions input;
    int horizon = 12;
    std::string out, svg, manifest;
};

int cmd_forecast(const ForecastOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    Manifest manifest("forecast", args);
    const std::string model_text = ingest::read_file(o.model_file);
    manifest.input(o.model_file, model_text);
    auto [config, model] = load_model(model_text);
    std::optional<TimeSeries> history;
    if (!o.input.path.empty()) {
        const std::string text = read_input(o.input, manifest);
        history = with_file_context(o.input.path, [&] { return series_from_text(text, o.input); });
    }
    const Forecast f = history ? model->forecast(*history, o.horizon) : model->forecast(o.horizon);
    std::ostringstream csv;
    csv << "timestamp,forecast\n";
    for (int h = 1; h <= f.horizon; ++h) {
        csv << ingest::format_iso8601(f.timestamp_at(h)) << ','
            << fmt("%.6f", f.values[static_cast<std::size_t>(h - 1)]) << '\n';
    }
    if (o.out.empty()) {
        out << csv.str();
    } else {
        plot::write_file(o.out, csv.str());
        manifest.output(o.out);
    }
    if (f.flagged) out << "warning: forecast contains clamped or nonpositive values\n";
    if (!o.svg.empty()) {
        plot::Chart chart{config.display_name() + " forecast", "minutes from origin", "glucose (mg/dL)", {}};
        if (history) {
            plot::Series h{"history", {}, {}, ""};
            const std::size_t keep = std::min<std::size_t>(history->size(), 72);
            for (std::size_t i = history->size() - keep; i < history->size(); ++i) {
                h.x.push_back(static_cast<double>(history->timestamp(i) - f.origin_timestamp) / 60.0);
                h.y.push_back(history->value(i));
            }
            chart.series.push_back(std::move(h));
        }
        plot::Series p{"forecast", {}, {}, ""};
        for (int step = 1; step <= f.horizon; ++step) {
            p.x.push_back(static_cast<double>(f.timestamp_at(step) - f.origin_timestamp) / 60.0);
            p.y.push_back(f.values[static_cast<std::size_t>(step - 1)]);
        }
        chart.series.push_back(std::move(p));
        plot::write_file(o.svg, plot::to_svg(chart));
        manifest.output(o.svg);
    }
    manifest["config"] = {{"model_file", o.model_file}, {"input", o.input.path}, {"horizon", o.horizon},
                          {"model", config.to_json()}};
    manifest["seed"] = config.seed;
    manifest.write(manifest_path(o.manifest, o.out, "forecast"));
    return 0;
}

// ---------------------------------------------------------------- evaluate / compare

struct EvalOptions {
    InputOptions input;
    std::vector<std::string> models;
    std::string ablate;
    ModelOptions m;
    ProtocolOptions protocol;
    std::uint64_t seed = 0;
    bool no_baseline = false;
    bool serial = false;
    std::string out, svg, manifest;
};

void write_overlays(const eval::EvalReport& report, const TimeSeries& series, const std::string& prefix,
                    Manifest& manifest) {
    for (const auto& row : report.rows) {
        if (!row.ok()) continue;
        plot::Series actual{"actual", {}, {}, "#000000"};
        plot::Series predicted{row.config.display_name() + " (step " + std::to_string(report.protocol.horizon) + ")",
                               {}, {}, "#d62728"};
        const std::int64_t t0 = series.timestamp(0);
        for (const auto& p : row.result->predictions) {
            if (p.offset != report.protocol.horizon) continue;
            const double hours = static_cast<double>(p.timestamp - t0) / 3600.0;
            actual.x.push_back(hours);
            actual.y.push_back(p.actual);
            predicted.x.push_back(hours);
            predicted.y.push_back(p.predicted);
        }
        plot::Chart chart{row.config.display_name() + ": actual vs predicted", "hours from series start",
                          "glucose (mg/dL)", {actual, predicted}};
        const std::string path = prefix + "-" + sanitize(row.config.display_name()) + ".svg";
        plot::write_file(path, plot::to_svg(chart));
        manifest.output(path);
    }
}

int cmd_evaluate(const EvalOptions& o, bool is_compare, const std::vector<std::string>& args, std::ostream& out) {
    const std::string command = is_compare ? "compare" : "evaluate";
    Manifest manifest(command, args);
    const auto protocol = o.protocol.resolve();
    std::vector<ModelId> ids;
    bool add_baseline = !o.no_baseline && is_compare;
    if (!o.ablate.empty()) {
        if (o.ablate != "timeglu") throw UsageError("--ablate supports only timeglu");
        add_baseline = false;
    } else {
        std::vector<std::string> names = o.models;
        if (names.empty()) {
            if (!is_compare) throw UsageError("evaluate needs --model");
            names = {"des", "auto-arima", "bats", "tbats", "timeglu"};
        }
        if (!is_compare && names.size() != 1) throw UsageError("evaluate takes exactly one --model; use compare");
        for (const auto& name : names) ids.push_back(parse_model_name(name));
    }

    const std::string text = read_input(o.input, manifest);
    const auto series = with_file_context(o.input.path, [&] { return series_from_text(text, o.input); });
    std::vector<ForecasterConfig> configs;
    if (!o.ablate.empty()) {
        configs = timeglu_ablation(build_config(ModelId::TimeGlu, o.m, series.interval_s(), protocol.horizon, o.seed));
    }
    for (const ModelId id : ids) {
        configs.push_back(build_config(id, o.m, series.interval_s(), protocol.horizon, o.seed));
    }

    const auto report = eval::compare(configs, series, protocol, {add_baseline, !o.serial});
    out << report.table();
    plot::write_file(o.out, report.to_json().dump(2) + "\n");
    manifest.output(o.out);
    if (!o.svg.empty()) write_overlays(report, series, o.svg, manifest);

    json models = json::array();
    for (const auto& c : configs) models.push_back(c.to_json());
    manifest["config"] = {{"input", o.input.path},
                          {"preset", o.input.preset},
                          {"time_format", o.input.time_format},
                          {"interval_s", o.input.interval_s},
                          {"max_gap_s", o.input.max_gap_s},
                          {"protocol", protocol.to_json()},
                          {"baseline", add_baseline},
                          {"ablate", o.ablate},
                          {"models", models}};
    manifest["seed"] = o.seed;
    manifest["dataset_digest"] = report.dataset_digest;
    manifest["timings"] = report.timings_json();
    manifest.write(manifest_path(o.manifest, o.out, command));

    const bool any_ok = std::any_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.ok(); });
    return any_ok ? 0 : exit_code(ErrorKind::Fit);
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
    int seeds = 3;
    std::uint64_t seed = 1;
    std::size_t window = 5, hidden = 3, attn_dim = 2, layers = 2;
    double tolerance = 1e-4;
    std::string manifest;
};

int cmd_gradcheck(const GradcheckOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    Manifest manifest("gradcheck", args);
    neural::Architecture arch;
    arch.window = o.window;
    arch.encoder_layers = o.layers;
    arch.encoder_hidden = o.hidden;
    arch.attn_dim = o.attn_dim;
    arch.decoder_hidden = o.hidden;
    arch.validate();
    double worst = 0.0;
    json results = json::array();
    for (int i = 0; i < o.seeds; ++i) {
        const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(i);
        const auto r = neural::gradient_check(arch, seed);
        out << "seed " << seed << ": max relative error " << fmt("%.3e", r.max_relative_error) << " over " << r.checked
            << " entries (worst: " << r.worst_parameter << ")\n";
        results.push_back({{"seed", seed}, {"max_relative_error", r.max_relative_error},
                           {"worst_parameter", r.worst_parameter}, {"checked", r.checked}});
        worst = std::max(worst, r.max_relative_error);
    }
    const bool pass = worst <= o.tolerance;
    out << "max relative error " << fmt("%.3e", worst) << (pass ? " <= " : " > ") << fmt("%g", o.tolerance)
        << (pass ? "  PASS\n" : "  FAIL\n");
    manifest["config"] = {{"window", o.window}, {"hidden", o.hidden}, {"attn_dim", o.attn_dim}, {"layers", o.layers},
                          {"seeds", o.seeds}, {"tolerance", o.tolerance}};
    manifest["seed"] = o.seed;
    manifest["summary"] = {{"results", results}, {"max_relative_error", worst}, {"pass", pass}};
    manifest.write(manifest_path(o.manifest, "", "gradcheck"));
    return pass ? 0 : exit_code(ErrorKind::Fit);
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
    synth::CgmConfig config;
    std::string out, manifest;
};

int cmd_synth(const SynthOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    Manifest manifest("synth", args);
    const auto series = synth::synthetic_cgm(o.config);
    plot::write_file(o.out, to_csv(series));
    manifest.output(o.out);
    const auto m = synth::expected_moments(o.config);
    out << "wrote " << series.size() << " samples to " << o.out << '\n';
    manifest["config"] = {{"days", o.config.days},
                          {"interval_s", o.config.interval_s},
                          {"noise_sigma", o.config.noise_sigma},
                          {"baseline", o.config.baseline},
                          {"daily_amplitude", o.config.daily_amplitude}};
    manifest["seed"] = o.config.seed;
    manifest["summary"] = {{"expected_mean", m.mean}, {"expected_std", std::sqrt(m.variance)}};
    manifest.write(manifest_path(o.manifest, o.out, "synth"));
    return 0;
}

}  // namespace

int exit_code(ErrorKind kind) { return static_cast<int>(kind); }

std::vector<GlucoseSample> load_samples(const InputOptions& input) {
    return with_file_context(input.path, [&] { return samples_from_text(ingest::read_file(input.path), input); });
}

TimeSeries load_series(const InputOptions& input) {
    return with_file_context(input.path, [&] { return series_from_text(ingest::read_file(input.path), input); });
}

ModelId parse_model_name(const std::string& name) {
    static const std::vector<std::pair<std::string, ModelId>> aliases{
        {"des", ModelId::DFS},         {"dfs", ModelId::DFS},       {"auto-arima", ModelId::AutoARIMA},
        {"arima", ModelId::AutoARIMA}, {"bats", ModelId::BATS},     {"tbats", ModelId::TBATS},
        {"timeglu", ModelId::TimeGlu}, {"persistence", ModelId::Persistence}};
    for (const auto& [alias, id] : aliases) {
        if (alias == name) return id;
    }
    try {
        return model_id_from_string(name);
    } catch (const UsageError&) {
        throw UsageError("unknown model '" + name + "' (expected des, auto-arima, bats, tbats, timeglu, persistence)");
    }
}

std::vector<ForecasterConfig> timeglu_ablation(const ForecasterConfig& full) {
    const auto& base = std::get<TimeGluConfig>(full.params);
    std::vector<ForecasterConfig> out;
    auto variant = [&](const char* label, bool enc_bi, bool dec_bi, bool attention) {
        ForecasterConfig c = full;
        auto t = base;
        t.train.arch.encoder_bidirectional = enc_bi;
        t.train.arch.decoder_bidirectional = dec_bi;
        t.train.arch.use_attention = attention;
        c.params = t;
        c.label = label;
        out.push_back(std::move(c));
    };
    variant("TimeGlu", true, true, true);
    variant("TimeGlu-LSTM-encoder", false, true, true);
    variant("TimeGlu-LSTM-decoder", true, false, true);
    variant("TimeGlu-no-attention", true, true, false);
    return out;
}

std::string to_csv(const TimeSeries& series) {
    std::string out = "timestamp,glucose\n";
    char buf[32];
    for (const auto& s : series.samples()) {
        std::snprintf(buf, sizeof buf, ",%.1f\n", s.value);
        out += ingest::format_iso8601(s.timestamp) + buf;
    }
    return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"glucast: short-horizon CGM glucose forecasting"};
    app.name("glucast");
    app.set_version_flag("--version", kToolVersion);
    app.set_config("--config", "", "Read options from a TOML/INI file (command-line flags take precedence)");
    app.require_subcommand(1);

    StatsOptions stats;
    auto* c_stats = app.add_subcommand("stats", "Dataset summary: n, mean and std, range, TIR/TAR/TBR");
    add_input_options(c_stats, stats.input);
    c_stats->add_option("--lo", stats.lo, "Lower range threshold (mg/dL)")->capture_default_str();
    c_stats->add_option("--hi", stats.hi, "Upper range threshold (mg/dL)")->capture_default_str();
    c_stats->add_option("-o,--out", stats.out, "Write the summary as JSON");
    c_stats->add_option("--svg", stats.svg, "Write an hour-of-day profile plot");
    c_stats->add_option("--manifest", stats.manifest, "Manifest path");

    FitOptions fit;
    auto* c_fit = app.add_subcommand("fit", "Fit one model and write a model file");
    add_input_options(c_fit, fit.input);
    c_fit->add_option("-m,--model", fit.model, "des, auto-arima, bats, tbats, timeglu, persistence")
        ->capture_default_str();
    add_model_options(c_fit, fit.m);
    c_fit->add_option("--seed", fit.seed, "Random seed")->capture_default_str();
    c_fit->add_option("--train-fraction", fit.train_fraction, "Fit on this leading share of the series")
        ->capture_default_str();
    c_fit->add_option("-o,--out", fit.out, "Model file")->required();
    c_fit->add_option("--log", fit.log, "TimeGlu: write the per-epoch loss curve as CSV");
    c_fit->add_option("--manifest", fit.manifest, "Manifest path (default: <out>.manifest.json)");

    ForecastOptions fc;
    auto* c_fc = app.add_subcommand("forecast", "Forecast k steps from a model file");
    c_fc->add_option("--model-file", fc.model_file, "Model file written by fit")->required();
    add_input_options(c_fc, fc.input, false);
    c_fc->add_option("-k,--horizon", fc.horizon, "Steps ahead")->capture_default_str();
    c_fc->add_option("-o,--out", fc.out, "Forecast CSV (default: stdout)");
    c_fc->add_option("--svg", fc.svg, "Plot of history and forecast");
    c_fc->add_option("--manifest", fc.manifest, "Manifest path");

    EvalOptions ev;
    auto* c_ev = app.add_subcommand("evaluate", "Rolling-origin backtest of one model");
    add_input_options(c_ev, ev.input);
    c_ev->add_option("-m,--model", ev.models, "Model to evaluate")->expected(1);
    add_model_options(c_ev, ev.m);
    add_protocol_options(c_ev, ev.protocol);
    c_ev->add_option("--seed", ev.seed, "Random seed")->capture_default_str();
    c_ev->add_flag("--serial", ev.serial, "Run without OpenMP");
    c_ev->add_option("-o,--out", ev.out, "Report file (JSON)")->required();
    c_ev->add_option("--svg", ev.svg, "Overlay plot prefix");
    c_ev->add_option("--manifest", ev.manifest, "Manifest path (default: <out>.manifest.json)");

    EvalOptions cmp;
    auto* c_cmp = app.add_subcommand("compare", "Backtest several models on identical folds");
    add_input_options(c_cmp, cmp.input);
    c_cmp->add_option("--models", cmp.models, "Comma-separated models (default: all five)")->delimiter(',');
    c_cmp->add_option("--ablate", cmp.ablate, "timeglu: compare the four structure variants");
    add_model_options(c_cmp, cmp.m);
    add_protocol_options(c_cmp, cmp.protocol);
    c_cmp->add_option("--seed", cmp.seed, "Random seed")->capture_default_str();
    c_cmp->add_flag("--no-baseline", cmp.no_baseline, "Do not add the persistence baseline");
    c_cmp->add_flag("--serial", cmp.serial, "Run without OpenMP");
    c_cmp->add_option("-o,--out", cmp.out, "Report file (JSON)")->required();
    c_cmp->add_option("--svg", cmp.svg, "Overlay plot prefix");
    c_cmp->add_option("--manifest", cmp.manifest, "Manifest path (default: <out>.manifest.json)");

    GradcheckOptions gc;
    auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference check of the TimeGlu gradients");
    c_gc->add_option("--seeds", gc.seeds, "Number of seeds")->capture_default_str();
    c_gc->add_option("--seed", gc.seed, "First seed")->capture_default_str();
    c_gc->add_option("--window", gc.window, "Window length")->capture_default_str();
    c_gc->add_option("--hidden", gc.hidden, "Hidden size")->capture_default_str();
    c_gc->add_option("--attn-dim", gc.attn_dim, "Attention size")->capture_default_str();
    c_gc->add_option("--layers", gc.layers, "Encoder layers")->capture_default_str();
    c_gc->add_option("--tolerance", gc.tolerance, "Largest accepted relative error")->capture_default_str();
    c_gc->add_option("--manifest", gc.manifest, "Manifest path");

    SynthOptions sy;
    auto* c_sy = app.add_subcommand("synth", "Write a synthetic CGM trace");
    c_sy->add_option("-o,--out", sy.out, "CSV path")->required();
    c_sy->add_option("--days", sy.config.days, "Days")->capture_default_str();
    c_sy->add_option("--interval", sy.config.interval_s, "Sampling interval (s)")->capture_default_str();
    c_sy->add_option("--noise", sy.config.noise_sigma, "Noise sigma (mg/dL)")->capture_default_str();
    c_sy->add_option("--seed", sy.config.seed, "Random seed")->capture_default_str();
    c_sy->add_option("--manifest", sy.manifest, "Manifest path");

    std::vector<const char*> argv{"glucast"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : exit_code(ErrorKind::Usage);
    }

    try {
        if (c_stats->parsed()) return cmd_stats(stats, args, out);
        if (c_fit->parsed()) return cmd_fit(fit, args, out);
        if (c_fc->parsed()) return cmd_forecast(fc, args, out);
        if (c_ev->parsed()) return cmd_evaluate(ev, false, args, out);
        if (c_cmp->parsed()) return cmd_evaluate(cmp, true, args, out);
        if (c_gc->parsed()) return cmd_gradcheck(gc, args, out);
        if (c_sy->parsed()) return cmd_synth(sy, args, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(ErrorKind::Fit);
    }
    return exit_code(ErrorKind::Usage);
}

}  // namespace glucast::cli
