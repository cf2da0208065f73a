#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "glucast/ingest.hpp"
#include "glucast/neural/timeglu.hpp"
#include "glucast/synth.hpp"
#include "oracles/scalar_lstm.hpp"

using namespace glucast;
using namespace glucast::neural;

namespace {

void randomize(Tensor& t, std::mt19937_64& gen, double scale = 0.5) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : t.data()) v = u(gen);
}

LstmWeights random_lstm(std::size_t in, std::size_t hidden, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    auto w = LstmWeights::zeros(in, hidden);
    randomize(w.w, gen);
    randomize(w.u, gen);
    randomize(w.b, gen);
    return w;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    auto t = Tensor::matrix(rows, cols);
    randomize(t, gen, 1.0);
    return t;
}

std::vector<double> flatten(const TimeGluParams& p) {
    std::vector<double> out;
    p.for_each([&](const std::string&, const Tensor& t) { out.insert(out.end(), t.data().begin(), t.data().end()); });
    return out;
}

Architecture tiny() {
    Architecture a;
    a.window = 5;
    a.encoder_layers = 2;
    a.encoder_hidden = 3;
    a.attn_dim = 2;
    a.decoder_hidden = 3;
    return a;
}

Tensor column(const std::vector<double>& v) { return Tensor({v.size(), 1}, v); }

}  // namespace

TEST_CASE("lstm cell zero fixed point") {
    const auto w = LstmWeights::zeros(2, 3);
    const auto [h, c] = lstm_cell(Tensor::vector(2), Tensor::vector(3), Tensor::vector(3), w);
    CHECK(h.data() == std::vector<double>(3, 0.0));
    CHECK(c.data() == std::vector<double>(3, 0.0));
}

TEST_CASE("lstm cell with saturated gates") {
    auto w = LstmWeights::zeros(1, 1);
    w.b[w.gate_row(LstmWeights::Input)] = 100;
    w.b[w.gate_row(LstmWeights::Forget)] = -100;
    w.b[w.gate_row(LstmWeights::Cell)] = 100;
    w.b[w.gate_row(LstmWeights::Output)] = 100;
    const auto [h, c] = lstm_cell(Tensor::vector(1, 0.3), Tensor::vector(1), Tensor::vector(1, 5.0), w);
    CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(h[0] == doctest::Approx(std::tanh(1.0)).epsilon(1e-12));
    CHECK(h[0] == doctest::Approx(0.7616).epsilon(1e-4));
}

TEST_CASE("lstm cell matches the scalar oracle") {
    const auto w = random_lstm(3, 4, 11);
    const std::vector<double> x{0.3, -1.2, 0.8}, h0{0.1, -0.2, 0.05, 0.4}, c0{-0.5, 0.3, 0.9, -0.1};
    const auto [h, c] = lstm_cell(Tensor({3}, x), Tensor({4}, h0), Tensor({4}, c0), w);
    const auto ref = oracle::cell(x, h0, c0, w);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(std::abs(h[k] - ref.h[k]) <= 1e-12);
        CHECK(std::abs(c[k] - ref.c[k]) <= 1e-12);
    }
}

TEST_CASE("lstm cell rejects mismatched shapes") {
    const auto w = LstmWeights::zeros(3, 4);
    CHECK_THROWS_AS(lstm_cell(Tensor::vector(2), Tensor::vector(4), Tensor::vector(4), w), DataError);
    CHECK_THROWS_AS(lstm_cell(Tensor::vector(3), Tensor::vector(3), Tensor::vector(4), w), DataError);
}

TEST_CASE("bilstm with one step is the two cells side by side") {
    const auto wf = random_lstm(2, 3, 1), wb = random_lstm(2, 3, 2);
    const Tensor x({1, 2}, std::vector<double>{0.4, -0.7});
    const auto out = bilstm(x, wf, wb);
    REQUIRE(out.shape() == std::vector<std::size_t>{1, 6});
    const auto zero = Tensor::vector(3);
    const auto [hf, cf] = lstm_cell(Tensor({2}, std::vector<double>{0.4, -0.7}), zero, zero, wf);
    const auto [hb, cb] = lstm_cell(Tensor({2}, std::vector<double>{0.4, -0.7}), zero, zero, wb);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(out(0, k) == hf[k]);
        CHECK(out(0, 3 + k) == hb[k]);
    }
}

TEST_CASE("bilstm on a palindrome with shared weights is mirror symmetric") {
    const auto w = random_lstm(1, 4, 3);
    const auto x = column({0.5, -1.0, 2.0, -1.0, 0.5});
    const auto out = bilstm(x, w, w);
    const std::size_t T = 5, H = 4;
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < H; ++k) {
            CHECK(std::abs(out(t, k) - out(T - 1 - t, H + k)) <= 1e-15);
        }
    }
}

TEST_CASE("bilstm zero weights give zero output and match the oracle otherwise") {
    const auto zero = LstmWeights::zeros(2, 3);
    const auto x = random_matrix(4, 2, 9);
    const auto out = bilstm(x, zero, zero);
    CHECK(std::all_of(out.data().begin(), out.data().end(), [](double v) { return v == 0.0; }));

    RecurrentLayer layer{random_lstm(2, 3, 4), random_lstm(2, 3, 5)};
    oracle::Matrix seq(4);
    for (std::size_t t = 0; t < 4; ++t) seq[t] = {x(t, 0), x(t, 1)};
    const auto ref = oracle::run_layer(seq, layer);
    const auto got = recurrent_forward(x, layer);
    for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(got(t, k) - ref[t][k]) <= 1e-12);
    }
}

TEST_CASE("attention with v = 0 averages the rows") {
    auto w = AttentionWeights::zeros(3, 2);
    w.wq = random_matrix(2, 3, 1);
    w.wk = random_matrix(2, 3, 2);
    const auto h = random_matrix(4, 3, 3);
    const auto out = additive_attention(h, w);
    for (std::size_t d = 0; d < 3; ++d) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 4; ++t) mean += h(t, d) / 4.0;
        for (std::size_t t = 0; t < 4; ++t) CHECK(out(t, d) == doctest::Approx(mean).epsilon(1e-14));
    }
}

TEST_CASE("attention over one row is the identity") {
    auto w = AttentionWeights::zeros(3, 2);
    w.wq = random_matrix(2, 3, 4);
    w.wk = random_matrix(2, 3, 5);
    w.v = Tensor({2}, std::vector<double>{0.7, -1.3});
    const auto h = random_matrix(1, 3, 6);
    const auto out = additive_attention(h, w);
    for (std::size_t d = 0; d < 3; ++d) CHECK(out(0, d) == doctest::Approx(h(0, d)).epsilon(1e-15));
}

TEST_CASE("attention rows are convex combinations and match the oracle") {
    auto w = AttentionWeights::zeros(4, 3);
    w.wq = random_matrix(3, 4, 7);
    w.wk = random_matrix(3, 4, 8);
    w.v = Tensor({3}, std::vector<double>{1.5, -0.4, 2.2});
    const auto h = random_matrix(3, 4, 10);
    const auto out = additive_attention(h, w);
    oracle::Matrix hm(3);
    for (std::size_t t = 0; t < 3; ++t) hm[t].assign(h.row(t).begin(), h.row(t).end());
    const auto ref = oracle::attention(hm, w);
    for (std::size_t d = 0; d < 4; ++d) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t t = 0; t < 3; ++t) {
            lo = std::min(lo, h(t, d));
            hi = std::max(hi, h(t, d));
        }
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(out(t, d) >= lo - 1e-15);
            CHECK(out(t, d) <= hi + 1e-15);
            CHECK(std::abs(out(t, d) - ref[t][d]) <= 1e-12);
        }
    }
    CHECK_THROWS_AS(additive_attention(random_matrix(3, 5, 1), w), DataError);
}

TEST_CASE("zero parameters predict the head bias") {
    auto p = TimeGluParams::zeros(tiny());
    p.head_b[0] = 0.37;
    CHECK(timeglu_forward(random_matrix(5, 1, 2), p) == 0.37);
}

TEST_CASE("the head is affine") {
    auto p = TimeGluParams::initialize(tiny(), 4);
    const auto x = random_matrix(5, 1, 5);
    const double y = timeglu_forward(x, p);
    p.head_w.scale(2.0);
    p.head_b.scale(2.0);
    CHECK(timeglu_forward(x, p) == doctest::Approx(2 * y).epsilon(1e-14));
}

TEST_CASE("forward pass matches the scripted oracle") {
    Architecture a;
    a.window = 12;
    a.encoder_hidden = 4;
    a.attn_dim = 3;
    a.decoder_hidden = 5;
    std::vector<double> window(12);
    for (std::size_t t = 0; t < 12; ++t) window[t] = std::sin(0.5 * static_cast<double>(t)) - 0.2;

    for (const auto& arch : {a, [&] {
                                 auto b = a;
                                 b.encoder_bidirectional = false;
                                 b.decoder_bidirectional = false;
                                 b.use_attention = false;
                                 b.encoder_layers = 3;
                                 return b;
                             }()}) {
        const auto p = TimeGluParams::initialize(arch, 7);
        CHECK(std::abs(timeglu_forward(column(window), p) - oracle::timeglu(window, p)) <= 1e-10);
    }
    CHECK_THROWS_AS(timeglu_forward(column({1, 2, 3}), TimeGluParams::initialize(a, 7)), DataError);
}

TEST_CASE("layer shapes follow the architecture") {
    const auto p = TimeGluParams::initialize(tiny(), 1);
    REQUIRE(p.encoder.size() == 2);
    CHECK(p.encoder[0].forward.input_size == 1);
    CHECK(p.encoder[1].forward.input_size == 6);
    CHECK(p.attention.d_model == 6);
    CHECK(p.decoder.forward.input_size == 12);
    CHECK(p.head_w.size() == 6);

    auto ablated = tiny();
    ablated.use_attention = false;
    ablated.encoder_bidirectional = false;
    ablated.decoder_bidirectional = false;
    const auto q = TimeGluParams::initialize(ablated, 1);
    CHECK(q.decoder.forward.input_size == 3);
    CHECK_FALSE(q.decoder.bidirectional());
    CHECK(q.head_w.size() == 3);
    CHECK(std::isfinite(timeglu_forward(random_matrix(5, 1, 3), q)));
}

TEST_CASE("initialization is bounded by the fan-in rule and seeded") {
    const auto p = TimeGluParams::initialize(tiny(), 3);
    const double bound = 1.0 / std::sqrt(1.0);
    for (double v : p.encoder[0].forward.w.data()) CHECK(std::abs(v) <= bound);
    for (double v : p.encoder[1].forward.w.data()) CHECK(std::abs(v) <= 1.0 / std::sqrt(6.0));
    CHECK(flatten(p) == flatten(TimeGluParams::initialize(tiny(), 3)));
    CHECK(flatten(p) != flatten(TimeGluParams::initialize(tiny(), 4)));
}

TEST_CASE("mse examples") {
    const Tensor a({2}, std::vector<double>{1, 2}), z({2}, std::vector<double>{0, 0});
    CHECK(mse_loss(a, a) == 0.0);
    CHECK(mse_loss(a, z) == 2.5);
    CHECK(mse_loss_grad(a, z).data() == std::vector<double>{1, 2});
    CHECK_THROWS_AS(mse_loss(a, Tensor::vector(3)), DataError);
}

TEST_CASE("gradient check passes on three seeds for every variant") {
    auto uni = tiny();
    uni.encoder_bidirectional = false;
    auto no_attn = tiny();
    no_attn.use_attention = false;
    auto uni_dec = tiny();
    uni_dec.decoder_bidirectional = false;
    for (const auto& arch : {tiny(), uni, no_attn, uni_dec}) {
        for (std::uint64_t seed = 1; seed <= 3; ++seed) {
            const auto r = gradient_check(arch, seed);
            CHECK(r.max_relative_error <= 1e-4);
            CHECK(r.checked == TimeGluParams::initialize(arch, seed).parameter_count());
        }
    }
}

TEST_CASE("relative error floor") {
    CHECK(relative_error(0.0, 0.0) == 0.0);
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(1e-9, 2e-9) == doctest::Approx(1e-3));
}

TEST_CASE("zero loss gives zero gradients and the gradient is linear in the loss") {
    const auto p = TimeGluParams::initialize(tiny(), 5);
    std::vector<double> series(20);
    for (std::size_t t = 0; t < series.size(); ++t) series[t] = std::cos(0.7 * static_cast<double>(t));
    auto windows = make_windows(series, 5);
    REQUIRE(windows.inputs.size() == 15);
    std::vector<std::size_t> idx{0, 3, 7};
    for (auto i : idx) windows.targets[i] = timeglu_forward(windows.inputs[i], p);
    TimeGluParams grads;
    CHECK(batch_loss_and_gradient(p, windows, idx, nullptr, grads, false) == 0.0);
    for (double g : flatten(grads)) REQUIRE(g == 0.0);

    ForwardTrace trace;
    timeglu_forward(windows.inputs[1], p, &trace);
    auto g1 = TimeGluParams::zeros(tiny()), g3 = TimeGluParams::zeros(tiny());
    timeglu_backward(trace, p, 0.25, g1);
    timeglu_backward(trace, p, 0.75, g3);
    const auto a = flatten(g1), b = flatten(g3);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(b[i] - 3 * a[i]) <= 1e-14 * (1 + std::abs(b[i])));
}

TEST_CASE("windows") {
    const auto w = make_windows({1, 2, 3, 4, 5}, 3);
    REQUIRE(w.inputs.size() == 2);
    CHECK(w.inputs[0].data() == std::vector<double>{1, 2, 3});
    CHECK(w.inputs[0].shape() == std::vector<std::size_t>{3, 1});
    CHECK(w.targets == std::vector<double>{4, 5});
}

TEST_CASE("batch loss is invariant to the order of windows") {
    const auto p = TimeGluParams::initialize(tiny(), 8);
    const auto series = synth::sinusoid(60, 12, 0.0, 1.0, 0.1, 2);
    const auto windows = make_windows(series, 5);
    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd(0.0, 0.05);
    std::vector<std::vector<double>> noise(windows.inputs.size(), std::vector<double>(5));
    for (auto& n : noise)
        for (auto& v : n) v = nd(gen);
    std::vector<std::size_t> idx(windows.inputs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto shuffled = idx;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    const double a = batch_loss(p, windows, idx, &noise);
    const double b = batch_loss(p, windows, shuffled, &noise);
    CHECK(std::abs(a - b) <= 1e-12);
    CHECK(a != batch_loss(p, windows, idx, nullptr));
}

TEST_CASE("training sanity on a sinusoid") {
    const auto raw = TimeSeries::from_values(synth::sinusoid(300, 24, 120.0, 30.0, 2.0, 7));
    const auto [z, standardization] = ingest::standardize(raw);
    TrainConfig cfg;
    cfg.arch = tiny();
    cfg.arch.window = 12;
    cfg.arch.encoder_hidden = 4;
    cfg.arch.decoder_hidden = 4;
    cfg.arch.attn_dim = 4;
    cfg.epochs = 30;
    cfg.learning_rate = 1e-2;
    cfg.seed = 7;
    const auto r = train(z, cfg);
    const auto& log = r.log;
    REQUIRE(!log.epoch_loss.empty());
    CHECK(log.epoch_loss.back() < log.epoch_loss.front());
    const auto best = log.best_so_far();
    for (std::size_t i = 1; i < best.size(); ++i) CHECK(best[i] <= best[i - 1]);
    CHECK(log.best_epoch >= 0);
    CHECK(log.best_epoch < static_cast<int>(log.epoch_loss.size()));
    CHECK(log.epoch_loss[std::size_t(log.best_epoch)] == best.back());

    const auto again = train(z, cfg);
    CHECK(again.log.epoch_loss == log.epoch_loss);
    CHECK(flatten(again.params) == flatten(r.params));
    CHECK(serialize_params(again.params) == serialize_params(r.params));

    auto noiseless = cfg;
    noiseless.noise_sigma = 0.0;
    CHECK(train(z, noiseless).log.epoch_loss != log.epoch_loss);

    auto serial = cfg;
    serial.parallel = false;
    CHECK(train(z, serial).log.epoch_loss == log.epoch_loss);
}

TEST_CASE("training preconditions") {
    TrainConfig cfg;
    cfg.arch = tiny();
    CHECK_THROWS_AS(train(TimeSeries::from_values({1, 2, 3, 4, 5, 6}), cfg), DataError);
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg.epochs = 1;
    cfg.arch.window = 1;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    CHECK_THROWS_AS(ingest::standardize(TimeSeries::from_values(std::vector<double>(50, 100.0))), DataError);
}

TEST_CASE("prediction is the destandardized forward pass, applied recursively") {
    const auto p = TimeGluParams::initialize(tiny(), 6);
    const ingest::Standardization st{120.0, 20.0};
    const std::vector<double> hist{110, 115, 123, 130, 128, 125, 121};
    const auto history = TimeSeries::from_values(hist);

    std::vector<double> z;
    for (std::size_t t = hist.size() - 5; t < hist.size(); ++t) z.push_back(st.apply(hist[t]));
    const auto one = predict_timeglu(p, history, st, 1);
    CHECK(one.values[0] == st.invert(timeglu_forward(column(z), p)));
    CHECK(one.model_id == ModelId::TimeGlu);

    const auto three = predict_timeglu(p, history, st, 3);
    auto grown = hist;
    for (int step = 0; step < 3; ++step) {
        const auto f = predict_timeglu(p, TimeSeries::from_values(grown), st, 1);
        CHECK(f.values[0] == three.values[std::size_t(step)]);
        grown.push_back(f.values[0]);
    }
    CHECK_THROWS_AS(predict_timeglu(p, TimeSeries::from_values({100, 110, 120}), st, 1), DataError);
    CHECK_THROWS_AS(predict_timeglu(p, history, st, 0), UsageError);
}

TEST_CASE("weights serialize losslessly") {
    auto arch = tiny();
    arch.decoder_bidirectional = false;
    const auto p = TimeGluParams::initialize(arch, 12);
    const auto text = serialize_params(p);
    const auto back = deserialize_params(text);
    CHECK(back.arch == p.arch);
    CHECK(flatten(back) == flatten(p));
    CHECK(serialize_params(back) == text);
    CHECK_THROWS_AS(deserialize_params("{}"), DataError);
    CHECK_THROWS_AS(deserialize_params("not json"), DataError);
}
