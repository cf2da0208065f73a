#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "glucast/neural/tensor.hpp"

namespace glucast::neural {

/**
 * LSTM parameters with the four gates stacked row-wise in the order
 * input, forget, cell candidate, output:
 *   w: (4*hidden x input), u: (4*hidden x hidden), b: (4*hidden).
 */
struct LstmWeights {
    std::size_t input_size = 0;
    std::size_t hidden_size = 0;
    Tensor w;
    Tensor u;
    Tensor b;

    static LstmWeights zeros(std::size_t input_size, std::size_t hidden_size);

    enum Gate : std::size_t { Input = 0, Forget = 1, Cell = 2, Output = 3 };
    /// Row offset of a gate block inside w/u/b.
    std::size_t gate_row(Gate g) const { return static_cast<std::size_t>(g) * hidden_size; }
};

/// Values recorded by one LSTM step for the backward pass.
struct LstmStepCache {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> i, f, g, o;  // post-activation gates
    std::vector<double> c, tanh_c, h;
};

struct LstmSequenceCache {
    bool reverse = false;
    std::vector<LstmStepCache> steps;  // in processing order
};

double sigmoid(double x);

/// One LSTM step: gates from w*x + u*h_prev + b; c = f.c_prev + i.g; h = o.tanh(c).
std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmWeights& w);

/// Runs one direction over seq (T x input) from a zero state. Output row t is
/// the hidden state at time t regardless of direction.
Tensor lstm_sequence(const Tensor& seq, const LstmWeights& w, bool reverse, LstmSequenceCache* cache = nullptr);

/// Backpropagates d_out (T x hidden) through a recorded sequence; accumulates
/// parameter gradients into `grad` and input gradients into `d_seq` (T x input).
void lstm_sequence_backward(const Tensor& d_out, const LstmSequenceCache& cache, const LstmWeights& w,
                            LstmWeights& grad, Tensor& d_seq);

/// A recurrent layer: forward LSTM plus an optional backward LSTM.
struct RecurrentLayer {
    LstmWeights forward;
    std::optional<LstmWeights> backward;

    bool bidirectional() const { return backward.has_value(); }
    std::size_t output_size() const { return forward.hidden_size * (bidirectional() ? 2 : 1); }
};

struct RecurrentCache {
    LstmSequenceCache forward, backward;
};

/// Per-timestep concatenation [forward | backward] for bidirectional layers.
Tensor recurrent_forward(const Tensor& seq, const RecurrentLayer& layer, RecurrentCache* cache = nullptr);
void recurrent_backward(const Tensor& d_out, const RecurrentCache& cache, const RecurrentLayer& layer,
                        RecurrentLayer& grad, Tensor& d_seq);

/// Bidirectional LSTM over seq (T x input) -> (T x 2*hidden).
Tensor bilstm(const Tensor& seq, const LstmWeights& wf, const LstmWeights& wb);

/**
 * Additive attention parameters: score(i, j) = v . tanh(wq h_i + wk h_j).
 * wq, wk: (attn_dim x d_model); v: (attn_dim).
 */
struct AttentionWeights {
    std::size_t d_model = 0;
    std::size_t attn_dim = 0;
    Tensor wq;
    Tensor wk;
    Tensor v;

    static AttentionWeights zeros(std::size_t d_model, std::size_t attn_dim);
};

struct AttentionCache {
    Tensor h;        // T x d
    Tensor q, k;     // T x A
    std::vector<double> u;  // T*T*A, tanh(q_i + k_j)
    Tensor weights;  // T x T softmax rows
};

/// Self-attention over rows of h (T x d): output row i = sum_j softmax_j(score(i, j)) h_j.
Tensor additive_attention(const Tensor& h, const AttentionWeights& w, AttentionCache* cache = nullptr);
void additive_attention_backward(const Tensor& d_out, const AttentionCache& cache, const AttentionWeights& w,
                                 AttentionWeights& grad, Tensor& d_h);

}  // namespace glucast::neural
