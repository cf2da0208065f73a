#include "glucast/neural/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glucast/core.hpp"

namespace glucast::neural {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw DataError("shape mismatch: " + what);
}

// z = w x + u h + b for all four gates, then activations.
void lstm_step(std::span<const double> x, std::span<const double> h_prev, std::span<const double> c_prev,
               const LstmWeights& w, LstmStepCache& out) {
    const std::size_t H = w.hidden_size;
    const std::size_t I = w.input_size;
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
        double acc = w.b[r];
        const double* wr = w.w.data().data() + r * I;
        for (std::size_t k = 0; k < I; ++k) acc += wr[k] * x[k];
        const double* ur = w.u.data().data() + r * H;
        for (std::size_t k = 0; k < H; ++k) acc += ur[k] * h_prev[k];
        z[r] = acc;
    }
    out.x.assign(x.begin(), x.end());
    out.h_prev.assign(h_prev.begin(), h_prev.end());
    out.c_prev.assign(c_prev.begin(), c_prev.end());
    out.i.resize(H);
    out.f.resize(H);
    out.g.resize(H);
    out.o.resize(H);
    out.c.resize(H);
    out.tanh_c.resize(H);
    out.h.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
        out.i[j] = sigmoid(z[j]);
        out.f[j] = sigmoid(z[H + j]);
        out.g[j] = std::tanh(z[2 * H + j]);
        out.o[j] = sigmoid(z[3 * H + j]);
        out.c[j] = out.f[j] * c_prev[j] + out.i[j] * out.g[j];
        out.tanh_c[j] = std::tanh(out.c[j]);
        out.h[j] = out.o[j] * out.tanh_c[j];
    }
}

}  // namespace

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

LstmWeights LstmWeights::zeros(std::size_t input_size, std::size_t hidden_size) {
    LstmWeights w;
    w.input_size = input_size;
    w.hidden_size = hidden_size;
    w.w = Tensor::matrix(4 * hidden_size, input_size);
    w.u = Tensor::matrix(4 * hidden_size, hidden_size);
    w.b = Tensor::vector(4 * hidden_size);
    return w;
}

std::pair<Tensor, Tensor> lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev, const LstmWeights& w) {
    require(x.size() == w.input_size, "input has " + std::to_string(x.size()) + " entries, weights expect " +
                                          std::to_string(w.input_size));
    require(h_prev.size() == w.hidden_size, "h_prev has " + std::to_string(h_prev.size()) + " entries, hidden is " +
                                                std::to_string(w.hidden_size));
    require(c_prev.size() == w.hidden_size, "c_prev has " + std::to_string(c_prev.size()) + " entries, hidden is " +
                                                std::to_string(w.hidden_size));
    LstmStepCache step;
    lstm_step(x.data(), h_prev.data(), c_prev.data(), w, step);
    return {Tensor({w.hidden_size}, step.h), Tensor({w.hidden_size}, step.c)};
}

Tensor lstm_sequence(const Tensor& seq, const LstmWeights& w, bool reverse, LstmSequenceCache* cache) {
    require(seq.shape().size() == 2 && seq.cols() == w.input_size,
            "sequence " + seq.shape_string() + " vs input size " + std::to_string(w.input_size));
    require(seq.rows() >= 1, "empty sequence");
    const std::size_t T = seq.rows();
    const std::size_t H = w.hidden_size;
    Tensor out = Tensor::matrix(T, H);
    std::vector<double> h(H, 0.0), c(H, 0.0);
    LstmSequenceCache local;
    LstmSequenceCache& rec = cache ? *cache : local;
    rec.reverse = reverse;
    rec.steps.assign(T, {});
    for (std::size_t s = 0; s < T; ++s) {
        const std::size_t t = reverse ? T - 1 - s : s;
        LstmStepCache& step = rec.steps[s];
        lstm_step(seq.row(t), h, c, w, step);
        h = step.h;
        c = step.c;
        std::copy(h.begin(), h.end(), out.row(t).begin());
    }
    return out;
}

void lstm_sequence_backward(const Tensor& d_out, const LstmSequenceCache& cache, const LstmWeights& w,
                            LstmWeights& grad, Tensor& d_seq) {
    const std::size_t T = cache.steps.size();
    const std::size_t H = w.hidden_size;
    const std::size_t I = w.input_size;
    require(d_out.rows() == T && d_out.cols() == H, "d_out " + d_out.shape_string());
    require(d_seq.rows() == T && d_seq.cols() == I, "d_seq " + d_seq.shape_string());
    std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), da(4 * H);
    for (std::size_t s = T; s-- > 0;) {
        const std::size_t t = cache.reverse ? T - 1 - s : s;
        const LstmStepCache& st = cache.steps[s];
        for (std::size_t j = 0; j < H; ++j) {
            const double dh = d_out(t, j) + dh_next[j];
            const double d_o = dh * st.tanh_c[j];
            const double dc = dh * st.o[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]) + dc_next[j];
            const double d_i = dc * st.g[j];
            const double d_g = dc * st.i[j];
            const double d_f = dc * st.c_prev[j];
            dc_next[j] = dc * st.f[j];
            da[j] = d_i * st.i[j] * (1.0 - st.i[j]);
            da[H + j] = d_f * st.f[j] * (1.0 - st.f[j]);
            da[2 * H + j] = d_g * (1.0 - st.g[j] * st.g[j]);
            da[3 * H + j] = d_o * st.o[j] * (1.0 - st.o[j]);
        }
        std::fill(dh_next.begin(), dh_next.end(), 0.0);
        auto dx = d_seq.row(t);
        for (std::size_t r = 0; r < 4 * H; ++r) {
            const double a = da[r];
            grad.b[r] += a;
            double* gw = grad.w.data().data() + r * I;
            const double* wr = w.w.data().data() + r * I;
            for (std::size_t k = 0; k < I; ++k) {
                gw[k] += a * st.x[k];
                dx[k] += wr[k] * a;
            }
            double* gu = grad.u.data().data() + r * H;
            const double* ur = w.u.data().data() + r * H;
            for (std::size_t k = 0; k < H; ++k) {
                gu[k] += a * st.h_prev[k];
                dh_next[k] += ur[k] * a;
            }
        }
    }
}

Tensor recurrent_forward(const Tensor& seq, const RecurrentLayer& layer, RecurrentCache* cache) {
    Tensor fwd = lstm_sequence(seq, layer.forward, false, cache ? &cache->forward : nullptr);
    if (!layer.bidirectional()) return fwd;
    Tensor bwd = lstm_sequence(seq, *layer.backward, true, cache ? &cache->backward : nullptr);
    const std::size_t T = seq.rows();
    const std::size_t H = layer.forward.hidden_size;
    const std::size_t Hb = layer.backward->hidden_size;
    Tensor out = Tensor::matrix(T, H + Hb);
    for (std::size_t t = 0; t < T; ++t) {
        std::copy_n(fwd.row(t).begin(), H, out.row(t).begin());
        std::copy_n(bwd.row(t).begin(), Hb, out.row(t).begin() + static_cast<std::ptrdiff_t>(H));
    }
    return out;
}

void recurrent_backward(const Tensor& d_out, const RecurrentCache& cache, const RecurrentLayer& layer,
                        RecurrentLayer& grad, Tensor& d_seq) {
    if (!layer.bidirectional()) {
        lstm_sequence_backward(d_out, cache.forward, layer.forward, grad.forward, d_seq);
        return;
    }
    const std::size_t T = d_out.rows();
    const std::size_t H = layer.forward.hidden_size;
    const std::size_t Hb = layer.backward->hidden_size;
    Tensor df = Tensor::matrix(T, H), db = Tensor::matrix(T, Hb);
    for (std::size_t t = 0; t < T; ++t) {
        std::copy_n(d_out.row(t).begin(), H, df.row(t).begin());
        std::copy_n(d_out.row(t).begin() + static_cast<std::ptrdiff_t>(H), Hb, db.row(t).begin());
    }
    lstm_sequence_backward(df, cache.forward, layer.forward, grad.forward, d_seq);
    lstm_sequence_backward(db, cache.backward, *layer.backward, *grad.backward, d_seq);
}

Tensor bilstm(const Tensor& seq, const LstmWeights& wf, const LstmWeights& wb) {
    RecurrentLayer layer{wf, wb};
    return recurrent_forward(seq, layer);
}

AttentionWeights AttentionWeights::zeros(std::size_t d_model, std::size_t attn_dim) {
    AttentionWeights w;
    w.d_model = d_model;
    w.attn_dim = attn_dim;
    w.wq = Tensor::matrix(attn_dim, d_model);
    w.wk = Tensor::matrix(attn_dim, d_model);
    w.v = Tensor::vector(attn_dim);
    return w;
}

Tensor additive_attention(const Tensor& h, const AttentionWeights& w, AttentionCache* cache) {
    require(h.shape().size() == 2 && h.cols() == w.d_model,
            "attention input " + h.shape_string() + " vs d_model " + std::to_string(w.d_model));
    const std::size_t T = h.rows();
    const std::size_t D = w.d_model;
    const std::size_t A = w.attn_dim;
    AttentionCache local;
    AttentionCache& c = cache ? *cache : local;
    c.h = h;
    c.q = Tensor::matrix(T, A);
    c.k = Tensor::matrix(T, A);
    for (std::size_t t = 0; t < T; ++t) {
        const auto ht = h.row(t);
        for (std::size_t a = 0; a < A; ++a) {
            double sq = 0.0, sk = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                sq += w.wq(a, d) * ht[d];
                sk += w.wk(a, d) * ht[d];
            }
            c.q(t, a) = sq;
            c.k(t, a) = sk;
        }
    }
    c.u.assign(T * T * A, 0.0);
    c.weights = Tensor::matrix(T, T);
    std::vector<double> scores(T);
    for (std::size_t i = 0; i < T; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < T; ++j) {
            double s = 0.0;
            double* u = c.u.data() + (i * T + j) * A;
            for (std::size_t a = 0; a < A; ++a) {
                u[a] = std::tanh(c.q(i, a) + c.k(j, a));
                s += w.v[a] * u[a];
            }
            scores[j] = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
            scores[j] = std::exp(scores[j] - mx);
            z += scores[j];
        }
        for (std::size_t j = 0; j < T; ++j) c.weights(i, j) = scores[j] / z;
    }
    Tensor out = Tensor::matrix(T, D);
    for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = 0; j < T; ++j) {
            const double a = c.weights(i, j);
            const auto hj = h.row(j);
            auto oi = out.row(i);
            for (std::size_t d = 0; d < D; ++d) oi[d] += a * hj[d];
        }
    return out;
}

void additive_attention_backward(const Tensor& d_out, const AttentionCache& c, const AttentionWeights& w,
                                 AttentionWeights& grad, Tensor& d_h) {
    const std::size_t T = c.h.rows();
    const std::size_t D = w.d_model;
    const std::size_t A = w.attn_dim;
    require(d_out.rows() == T && d_out.cols() == D, "attention d_out " + d_out.shape_string());
    Tensor dq = Tensor::matrix(T, A), dk = Tensor::matrix(T, A);
    std::vector<double> dweights(T);
    for (std::size_t i = 0; i < T; ++i) {
        const auto doi = d_out.row(i);
        double weighted = 0.0;
        for (std::size_t j = 0; j < T; ++j) {
            const auto hj = c.h.row(j);
            double s = 0.0;
            for (std::size_t d = 0; d < D; ++d) s += doi[d] * hj[d];
            dweights[j] = s;
            weighted += c.weights(i, j) * s;
            // Value path.
            auto dhj = d_h.row(j);
            const double a = c.weights(i, j);
            for (std::size_t d = 0; d < D; ++d) dhj[d] += a * doi[d];
        }
        for (std::size_t j = 0; j < T; ++j) {
            const double de = c.weights(i, j) * (dweights[j] - weighted);
            const double* u = c.u.data() + (i * T + j) * A;
            for (std::size_t a = 0; a < A; ++a) {
                grad.v[a] += de * u[a];
                const double dz = de * w.v[a] * (1.0 - u[a] * u[a]);
                dq(i, a) += dz;
                dk(j, a) += dz;
            }
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        const auto ht = c.h.row(t);
        auto dht = d_h.row(t);
        for (std::size_t a = 0; a < A; ++a) {
            const double gq = dq(t, a), gk = dk(t, a);
            for (std::size_t d = 0; d < D; ++d) {
                grad.wq(a, d) += gq * ht[d];
                grad.wk(a, d) += gk * ht[d];
                dht[d] += w.wq(a, d) * gq + w.wk(a, d) * gk;
            }
        }
    }
}

}  // namespace glucast::neural
