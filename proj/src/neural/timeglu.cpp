#include "glucast/neural/timeglu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "glucast/rng.hpp"

namespace glucast::neural {

using nlohmann::json;

void Architecture::validate() const {
    if (window < 2) throw UsageError("window must be >= 2");
    if (encoder_layers < 1) throw UsageError("encoder needs at least one layer");
    if (encoder_hidden < 1 || decoder_hidden < 1) throw UsageError("hidden sizes must be positive");
    if (use_attention && attn_dim < 1) throw UsageError("attention dimension must be positive");
}

void TrainConfig::validate() const {
    arch.validate();
    if (epochs < 1) throw UsageError("epochs must be >= 1");
    if (batch_size < 1) throw UsageError("batch size must be >= 1");
    if (!(learning_rate > 0.0) || !(beta1 > 0.0) || !(beta2 > 0.0) || !(epsilon > 0.0)) {
        throw UsageError("optimizer rates must be positive");
    }
    if (!(noise_sigma >= 0.0)) throw UsageError("noise sigma must be >= 0");
    if (patience < 1) throw UsageError("patience must be >= 1");
}

namespace {

RecurrentLayer zero_layer(std::size_t input, std::size_t hidden, bool bidirectional) {
    RecurrentLayer layer{LstmWeights::zeros(input, hidden), std::nullopt};
    if (bidirectional) layer.backward = LstmWeights::zeros(input, hidden);
    return layer;
}

template <typename Params, typename Fn>
void visit(Params& p, Fn&& fn) {
    auto lstm = [&](const std::string& prefix, auto& w) {
        fn(prefix + ".w", w.w);
        fn(prefix + ".u", w.u);
        fn(prefix + ".b", w.b);
    };
    auto layer = [&](const std::string& prefix, auto& l) {
        lstm(prefix + ".fwd", l.forward);
        if (l.backward) lstm(prefix + ".bwd", *l.backward);
    };
    for (std::size_t i = 0; i < p.encoder.size(); ++i) layer("encoder" + std::to_string(i), p.encoder[i]);
    if (p.arch.use_attention) {
        fn("attention.wq", p.attention.wq);
        fn("attention.wk", p.attention.wk);
        fn("attention.v", p.attention.v);
    }
    layer("decoder", p.decoder);
    fn("head.w", p.head_w);
    fn("head.b", p.head_b);
}

// Fan-in used for the init range of each named tensor.
std::size_t fan_in(const std::string& name, const Tensor& t) {
    if (name.ends_with(".b") && name != "head.b") return t.size() / 4;  // LSTM bias: hidden size
    if (name == "head.b") return 1;
    if (name == "attention.v") return t.size();
    return t.cols();
}

}  // namespace

TimeGluParams TimeGluParams::zeros(const Architecture& arch) {
    arch.validate();
    TimeGluParams p;
    p.arch = arch;
    std::size_t input = 1;
    for (std::size_t l = 0; l < arch.encoder_layers; ++l) {
        p.encoder.push_back(zero_layer(input, arch.encoder_hidden, arch.encoder_bidirectional));
        input = arch.encoder_output();
    }
    if (arch.use_attention) p.attention = AttentionWeights::zeros(arch.encoder_output(), arch.attn_dim);
    p.decoder = zero_layer(arch.decoder_input(), arch.decoder_hidden, arch.decoder_bidirectional);
    p.head_w = Tensor::matrix(1, arch.decoder_output());
    p.head_b = Tensor::vector(1);
    return p;
}

TimeGluParams TimeGluParams::initialize(const Architecture& arch, std::uint64_t seed) {
    TimeGluParams p = zeros(arch);
    Rng rng(seed);
    p.for_each([&](const std::string& name, Tensor& t) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fan_in(name, t))));
        for (double& v : t.data()) v = rng.uniform(-bound, bound);
    });
    return p;
}

void TimeGluParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) { visit(*this, fn); }

void TimeGluParams::for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    visit(*this, fn);
}

std::size_t TimeGluParams::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

void TimeGluParams::fill(double v) {
    for_each([&](const std::string&, Tensor& t) { t.fill(v); });
}

void TimeGluParams::axpy(double s, const TimeGluParams& other) {
    std::vector<const Tensor*> src;
    other.for_each([&](const std::string&, const Tensor& t) { src.push_back(&t); });
    std::size_t i = 0;
    for_each([&](const std::string&, Tensor& t) { t.axpy(s, *src.at(i++)); });
}

double timeglu_forward(const Tensor& window, const TimeGluParams& params, ForwardTrace* trace) {
    const auto& arch = params.arch;
    if (window.shape().size() != 2 || window.cols() != 1 || window.rows() != arch.window) {
        throw DataError("shape mismatch: window " + window.shape_string() + ", expected [" +
                        std::to_string(arch.window) + "x1]");
    }
    ForwardTrace local;
    ForwardTrace& tr = trace ? *trace : local;
    tr.input = window;
    tr.layer_inputs.clear();
    tr.encoder.assign(params.encoder.size(), {});
    Tensor x = window;
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        tr.layer_inputs.push_back(x);
        x = recurrent_forward(x, params.encoder[l], &tr.encoder[l]);
    }
    tr.encoded = x;
    const std::size_t T = x.rows();
    if (arch.use_attention) {
        const Tensor attended = additive_attention(tr.encoded, params.attention, &tr.attention);
        const std::size_t E = tr.encoded.cols();
        tr.fused = Tensor::matrix(T, 2 * E);
        for (std::size_t t = 0; t < T; ++t) {
            std::copy_n(tr.encoded.row(t).begin(), E, tr.fused.row(t).begin());
            std::copy_n(attended.row(t).begin(), E, tr.fused.row(t).begin() + static_cast<std::ptrdiff_t>(E));
        }
    } else {
        tr.fused = tr.encoded;
    }
    tr.decoded = recurrent_forward(tr.fused, params.decoder, &tr.decoder);
    const auto last = tr.decoded.row(T - 1);
    double y = params.head_b[0];
    for (std::size_t k = 0; k < last.size(); ++k) y += params.head_w[k] * last[k];
    tr.prediction = y;
    return y;
}

void timeglu_backward(const ForwardTrace& tr, const TimeGluParams& params, double d_prediction,
                      TimeGluParams& grads) {
    const std::size_t T = tr.decoded.rows();
    const std::size_t Dd = tr.decoded.cols();
    grads.head_b[0] += d_prediction;
    Tensor d_decoded = Tensor::matrix(T, Dd);
    const auto last = tr.decoded.row(T - 1);
    for (std::size_t k = 0; k < Dd; ++k) {
        grads.head_w[k] += d_prediction * last[k];
        d_decoded(T - 1, k) = d_prediction * params.head_w[k];
    }

    Tensor d_fused = Tensor::matrix(T, tr.fused.cols());
    recurrent_backward(d_decoded, tr.decoder, params.decoder, grads.decoder, d_fused);

    Tensor d_encoded = Tensor::matrix(T, tr.encoded.cols());
    if (params.arch.use_attention) {
        const std::size_t E = tr.encoded.cols();
        Tensor d_attended = Tensor::matrix(T, E);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t k = 0; k < E; ++k) {
                d_encoded(t, k) = d_fused(t, k);
                d_attended(t, k) = d_fused(t, E + k);
            }
        }
        additive_attention_backward(d_attended, tr.attention, params.attention, grads.attention, d_encoded);
    } else {
        d_encoded = d_fused;
    }

    Tensor d_x = std::move(d_encoded);
    for (std::size_t l = params.encoder.size(); l-- > 0;) {
        Tensor d_in = Tensor::matrix(T, tr.layer_inputs[l].cols());
        recurrent_backward(d_x, tr.encoder[l], params.encoder[l], grads.encoder[l], d_in);
        d_x = std::move(d_in);
    }
}

double mse_loss(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw DataError("shape mismatch: pred " + pred.shape_string() + " vs target " + target.shape_string());
    }
    if (pred.size() == 0) throw DataError("empty loss input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

Tensor mse_loss_grad(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw DataError("shape mismatch: pred " + pred.shape_string() + " vs target " + target.shape_string());
    }
    Tensor g(pred.shape());
    const double n = static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) g[i] = 2.0 * (pred[i] - target[i]) / n;
    return g;
}

WindowSet make_windows(const std::vector<double>& values, std::size_t window) {
    WindowSet set;
    for (std::size_t t = window; t < values.size(); ++t) {
        set.inputs.emplace_back(std::vector<std::size_t>{window, 1},
                                std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(t - window),
                                                    values.begin() + static_cast<std::ptrdiff_t>(t)));
        set.targets.push_back(values[t]);
    }
    return set;
}

namespace {

Tensor noisy_input(const WindowSet& windows, std::size_t idx, const std::vector<std::vector<double>>* noise) {
    Tensor x = windows.inputs[idx];
    if (noise) {
        const auto& n = (*noise)[idx];
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += n[i];
    }
    return x;
}

}  // namespace

double batch_loss_and_gradient(const TimeGluParams& params, const WindowSet& windows,
                               const std::vector<std::size_t>& indices,
                               const std::vector<std::vector<double>>* noise, TimeGluParams& grads, bool parallel) {
    const std::size_t B = indices.size();
    if (B == 0) throw DataError("empty batch");
    const double inv_b = 1.0 / static_cast<double>(B);
    std::vector<double> losses(B);
    std::vector<TimeGluParams> per(B, TimeGluParams::zeros(params.arch));

    auto one = [&](std::size_t b) {
        const std::size_t idx = indices[b];
        ForwardTrace trace;
        const double pred = timeglu_forward(noisy_input(windows, idx, noise), params, &trace);
        const double err = pred - windows.targets[idx];
        losses[b] = err * err;
        timeglu_backward(trace, params, 2.0 * err * inv_b, per[b]);
    };
    const auto n = static_cast<std::ptrdiff_t>(B);
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t b = 0; b < n; ++b) one(static_cast<std::size_t>(b));
    } else {
        for (std::ptrdiff_t b = 0; b < n; ++b) one(static_cast<std::size_t>(b));
    }

    grads = TimeGluParams::zeros(params.arch);
    double loss = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        grads.axpy(1.0, per[b]);
        loss += losses[b];
    }
    return loss * inv_b;
}

double batch_loss(const TimeGluParams& params, const WindowSet& windows, const std::vector<std::size_t>& indices,
                  const std::vector<std::vector<double>>* noise) {
    if (indices.empty()) throw DataError("empty batch");
    double loss = 0.0;
    for (std::size_t idx : indices) {
        const double err = timeglu_forward(noisy_input(windows, idx, noise), params) - windows.targets[idx];
        loss += err * err;
    }
    return loss / static_cast<double>(indices.size());
}

std::vector<double> TrainLog::best_so_far() const {
    std::vector<double> out;
    double best = std::numeric_limits<double>::infinity();
    for (double v : epoch_loss) {
        best = std::min(best, v);
        out.push_back(best);
    }
    return out;
}

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < epoch_loss.size(); ++e) os << e + 1 << ',' << epoch_loss[e] << '\n';
    return os.str();
}

TrainResult train(const TimeSeries& standardized, const TrainConfig& config) {
    config.validate();
    const auto& arch = config.arch;
    if (standardized.size() <= arch.window + 1) {
        throw DataError("insufficient data: need more than window + 1 = " + std::to_string(arch.window + 1) +
                        " points");
    }
    const WindowSet windows = make_windows(standardized.values(), arch.window);
    const std::size_t N = windows.targets.size();

    TrainResult result{TimeGluParams::initialize(arch, config.seed), {}};
    TimeGluParams params = result.params;
    TimeGluParams m = TimeGluParams::zeros(arch), v = TimeGluParams::zeros(arch), grads;
    Rng rng(config.seed ^ 0x9E3779B97F4A7C15ULL);

    std::vector<std::size_t> order(N);
    std::vector<std::vector<double>> noise;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const bool noisy = config.noise_sigma > 0.0;
        if (noisy) {
            noise.assign(N, std::vector<double>(arch.window));
            for (auto& row : noise)
                for (double& z : row) z = config.noise_sigma * rng.normal();
        }
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        double epoch_sum = 0.0;
        for (std::size_t start = 0; start < N; start += config.batch_size) {
            const std::size_t stop = std::min(N, start + config.batch_size);
            const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                 order.begin() + static_cast<std::ptrdiff_t>(stop));
            const double loss = batch_loss_and_gradient(params, windows, batch, noisy ? &noise : nullptr, grads,
                                                        config.parallel);
            epoch_sum += loss * static_cast<double>(batch.size());

            ++step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            std::vector<Tensor*> ms, vs, gs;
            m.for_each([&](const std::string&, Tensor& t) { ms.push_back(&t); });
            v.for_each([&](const std::string&, Tensor& t) { vs.push_back(&t); });
            grads.for_each([&](const std::string&, Tensor& t) { gs.push_back(&t); });
            std::size_t k = 0;
            params.for_each([&](const std::string&, Tensor& p) {
                auto& mt = ms[k]->data();
                auto& vt = vs[k]->data();
                const auto& gt = gs[k]->data();
                auto& pt = p.data();
                for (std::size_t i = 0; i < pt.size(); ++i) {
                    mt[i] = config.beta1 * mt[i] + (1.0 - config.beta1) * gt[i];
                    vt[i] = config.beta2 * vt[i] + (1.0 - config.beta2) * gt[i] * gt[i];
                    pt[i] -= config.learning_rate * (mt[i] / c1) / (std::sqrt(vt[i] / c2) + config.epsilon);
                }
                ++k;
            });
        }
        const double epoch_loss = epoch_sum / static_cast<double>(N);
        if (!std::isfinite(epoch_loss)) throw FitError("training diverged at epoch " + std::to_string(epoch + 1));
        result.log.epoch_loss.push_back(epoch_loss);
        if (epoch_loss < best - 1e-6) {
            best = epoch_loss;
            since_best = 0;
            result.log.best_epoch = epoch;
            result.params = params;
        } else if (++since_best >= config.patience) {
            result.log.early_stopped = true;
            break;
        }
    }
    return result;
}

Forecast predict_timeglu(const TimeGluParams& params, const TimeSeries& history,
                         const ingest::Standardization& standardization, int k) {
    if (k < 1) throw UsageError("forecast horizon must be >= 1");
    const std::size_t W = params.arch.window;
    if (history.size() < W) {
        throw DataError("history has " + std::to_string(history.size()) + " points, window needs " + std::to_string(W));
    }
    std::vector<double> buf;
    buf.reserve(W + static_cast<std::size_t>(k));
    for (std::size_t i = history.size() - W; i < history.size(); ++i) {
        buf.push_back(history.scale() == Scale::Standardized ? history.value(i)
                                                             : standardization.apply(history.value(i)));
    }
    std::vector<double> out;
    for (int h = 0; h < k; ++h) {
        Tensor window({W, 1}, std::vector<double>(buf.end() - static_cast<std::ptrdiff_t>(W), buf.end()));
        const double z = timeglu_forward(window, params);
        buf.push_back(z);
        out.push_back(standardization.invert(z));
    }
    return Forecast(history.last_timestamp(), history.interval_s(), std::move(out), ModelId::TimeGlu);
}

namespace {

json arch_to_json(const Architecture& a) {
    return {{"window", a.window},
            {"encoder_layers", a.encoder_layers},
            {"encoder_hidden", a.encoder_hidden},
            {"attn_dim", a.attn_dim},
            {"decoder_hidden", a.decoder_hidden},
            {"encoder_bidirectional", a.encoder_bidirectional},
            {"decoder_bidirectional", a.decoder_bidirectional},
            {"use_attention", a.use_attention}};
}

Architecture arch_from_json(const json& j) {
    Architecture a;
    a.window = j.at("window").get<std::size_t>();
    a.encoder_layers = j.at("encoder_layers").get<std::size_t>();
    a.encoder_hidden = j.at("encoder_hidden").get<std::size_t>();
    a.attn_dim = j.at("attn_dim").get<std::size_t>();
    a.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
    a.encoder_bidirectional = j.at("encoder_bidirectional").get<bool>();
    a.decoder_bidirectional = j.at("decoder_bidirectional").get<bool>();
    a.use_attention = j.at("use_attention").get<bool>();
    return a;
}

constexpr int kParamsFormatVersion = 1;

}  // namespace

std::string serialize_params(const TimeGluParams& params) {
    json tensors = json::array();
    params.for_each([&](const std::string& name, const Tensor& t) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"data", t.data()}});
    });
    json j = {{"format", "glucast-timeglu-params"},
              {"version", kParamsFormatVersion},
              {"architecture", arch_to_json(params.arch)},
              {"tensors", tensors}};
    return j.dump();
}

TimeGluParams deserialize_params(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed weight file: ") + e.what());
    }
    if (j.value("format", "") != "glucast-timeglu-params") throw DataError("not a TimeGlu weight file");
    if (j.value("version", 0) != kParamsFormatVersion) throw DataError("unsupported weight file version");
    TimeGluParams p = TimeGluParams::zeros(arch_from_json(j.at("architecture")));
    const auto& tensors = j.at("tensors");
    std::size_t i = 0;
    p.for_each([&](const std::string& name, Tensor& t) {
        if (i >= tensors.size()) throw DataError("weight file is missing tensor " + name);
        const auto& e = tensors[i++];
        if (e.at("name").get<std::string>() != name) throw DataError("weight file tensor order mismatch at " + name);
        Tensor loaded(e.at("shape").get<std::vector<std::size_t>>(), e.at("data").get<std::vector<double>>());
        if (loaded.shape() != t.shape()) throw DataError("weight file shape mismatch for " + name);
        t = std::move(loaded);
    });
    if (i != tensors.size()) throw DataError("weight file has extra tensors");
    return p;
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const Architecture& arch, std::uint64_t seed, double step, std::size_t batch) {
    TimeGluParams params = TimeGluParams::initialize(arch, seed);
    Rng rng(seed + 1);
    std::vector<double> series(arch.window + batch);
    for (double& v : series) v = rng.normal();
    const WindowSet windows = make_windows(series, arch.window);
    std::vector<std::size_t> idx(windows.targets.size());
    std::iota(idx.begin(), idx.end(), 0);

    TimeGluParams grads;
    batch_loss_and_gradient(params, windows, idx, nullptr, grads, false);
    std::vector<const Tensor*> analytic;
    grads.for_each([&](const std::string&, const Tensor& t) { analytic.push_back(&t); });

    GradCheckResult result;
    std::size_t k = 0;
    params.for_each([&](const std::string& name, Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t[i];
            t[i] = orig + step;
            const double up = batch_loss(params, windows, idx, nullptr);
            t[i] = orig - step;
            const double down = batch_loss(params, windows, idx, nullptr);
            t[i] = orig;
            const double numeric = (up - down) / (2.0 * step);
            const double err = relative_error((*analytic[k])[i], numeric);
            ++result.checked;
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = name + "[" + std::to_string(i) + "]";
            }
        }
        ++k;
    });
    return result;
}

}  // namespace glucast::neural
