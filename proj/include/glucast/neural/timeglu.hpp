#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "glucast/core.hpp"
#include "glucast/ingest.hpp"
#include "glucast/neural/layers.hpp"

namespace glucast::neural {

/// Architecture knobs. The three booleans are the ablation switches.
struct Architecture {
    std::size_t window = 24;
    std::size_t encoder_layers = 2;
    std::size_t encoder_hidden = 32;
    std::size_t attn_dim = 32;
    std::size_t decoder_hidden = 32;
    bool encoder_bidirectional = true;
    bool decoder_bidirectional = true;
    bool use_attention = true;

    std::size_t encoder_output() const { return encoder_hidden * (encoder_bidirectional ? 2 : 1); }
    std::size_t decoder_input() const { return encoder_output() * (use_attention ? 2 : 1); }
    std::size_t decoder_output() const { return decoder_hidden * (decoder_bidirectional ? 2 : 1); }
    void validate() const;
    bool operator==(const Architecture&) const = default;
};

struct TimeGluParams {
    Architecture arch;
    std::vector<RecurrentLayer> encoder;
    AttentionWeights attention;  // empty tensors when attention is disabled
    RecurrentLayer decoder;
    Tensor head_w;  // 1 x decoder_output
    Tensor head_b;  // 1

    static TimeGluParams zeros(const Architecture& arch);
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per tensor from Rng(seed).
    static TimeGluParams initialize(const Architecture& arch, std::uint64_t seed);

    /// Visits every trainable tensor in a fixed order with a stable name.
    void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
    std::size_t parameter_count() const;
    void fill(double v);
    /// this += s * other, tensor by tensor.
    void axpy(double s, const TimeGluParams& other);
};

/// Intermediates of one forward pass.
struct ForwardTrace {
    Tensor input;
    std::vector<Tensor> layer_inputs;  // input to each encoder layer
    std::vector<RecurrentCache> encoder;
    Tensor encoded;  // T x encoder_output
    AttentionCache attention;
    Tensor fused;    // T x decoder_input
    RecurrentCache decoder;
    Tensor decoded;  // T x decoder_output
    double prediction = 0.0;
};

/// window: (T x 1) standardized values. Returns the scalar next-value prediction.
double timeglu_forward(const Tensor& window, const TimeGluParams& params, ForwardTrace* trace = nullptr);

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(prediction).
void timeglu_backward(const ForwardTrace& trace, const TimeGluParams& params, double d_prediction,
                      TimeGluParams& grads);

/// Mean of squared elementwise differences.
double mse_loss(const Tensor& pred, const Tensor& target);
/// 2 (pred - target) / n.
Tensor mse_loss_grad(const Tensor& pred, const Tensor& target);

/// Sliding windows over a standardized series: inputs x[t-window..t-1], targets x[t].
struct WindowSet {
    std::vector<Tensor> inputs;
    std::vector<double> targets;
};
WindowSet make_windows(const std::vector<double>& values, std::size_t window);

/**
 * Mean squared error over `indices` of `windows` and its gradient (written
 * to `grads`, which is resized as needed). `noise` (optional) holds one
 * perturbation vector per window, added to the inputs only. With
 * parallel=true per-window gradients are computed with OpenMP into separate
 * buffers and summed in index order, so the result matches the serial path
 * bit for bit.
 */
double batch_loss_and_gradient(const TimeGluParams& params, const WindowSet& windows,
                               const std::vector<std::size_t>& indices,
                               const std::vector<std::vector<double>>* noise, TimeGluParams& grads, bool parallel);

/// Mean loss over `indices` at fixed parameters (no gradient).
double batch_loss(const TimeGluParams& params, const WindowSet& windows, const std::vector<std::size_t>& indices,
                  const std::vector<std::vector<double>>* noise);

struct TrainConfig {
    Architecture arch;
    int epochs = 100;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double noise_sigma = 0.05;  // standardized units
    std::uint64_t seed = 0;
    int patience = 10;
    bool parallel = true;

    void validate() const;
};

struct TrainLog {
    std::vector<double> epoch_loss;  // mean training loss per epoch
    int best_epoch = 0;              // 0-based
    bool early_stopped = false;

    /// Best-so-far curve (running minimum of epoch_loss).
    std::vector<double> best_so_far() const;
    std::string to_csv() const;
};

struct TrainResult {
    TimeGluParams params;  // weights at the best epoch
    TrainLog log;
};

/// Trains on a standardized series with Adam; see TrainConfig.
TrainResult train(const TimeSeries& standardized, const TrainConfig& config);

/// Recursive k-step forecast in mg/dL from the last `window` points of history.
Forecast predict_timeglu(const TimeGluParams& params, const TimeSeries& history,
                         const ingest::Standardization& standardization, int k);

/// Versioned text serialization (JSON with shape metadata).
std::string serialize_params(const TimeGluParams& params);
TimeGluParams deserialize_params(const std::string& text);

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t checked = 0;
};

/// Compares analytic gradients against central differences for every
/// parameter entry on a small random batch. Intended for tiny models.
GradCheckResult gradient_check(const Architecture& arch, std::uint64_t seed, double step = 1e-5,
                               std::size_t batch = 2);

/// Relative error with the denominator floored so exact zeros compare cleanly.
double relative_error(double analytic, double numeric);

}  // namespace glucast::neural
