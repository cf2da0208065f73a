#pragma once

// Plain-loop re-implementation of the TimeGlu forward pass. Reads the raw
// weight arrays only; none of the library's layer code is used.

#include <cmath>
#include <vector>

#include "glucast/neural/timeglu.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // [t][feature]

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct CellOut {
    std::vector<double> h, c;
};

/// Gate block g (0=i, 1=f, 2=g, 3=o), hidden unit k: row g*H + k.
inline CellOut cell(const std::vector<double>& x, const std::vector<double>& h_prev, const std::vector<double>& c_prev,
                    const glucast::neural::LstmWeights& w) {
    const std::size_t H = w.hidden_size, I = w.input_size;
    const auto& W = w.w.data();
    const auto& U = w.u.data();
    const auto& B = w.b.data();
    auto pre = [&](std::size_t gate, std::size_t k) {
        const std::size_t r = gate * H + k;
        double s = B[r];
        for (std::size_t j = 0; j < I; ++j) s += W[r * I + j] * x[j];
        for (std::size_t j = 0; j < H; ++j) s += U[r * H + j] * h_prev[j];
        return s;
    };
    CellOut out{std::vector<double>(H), std::vector<double>(H)};
    for (std::size_t k = 0; k < H; ++k) {
        const double i = logistic(pre(0, k));
        const double f = logistic(pre(1, k));
        const double g = std::tanh(pre(2, k));
        const double o = logistic(pre(3, k));
        out.c[k] = f * c_prev[k] + i * g;
        out.h[k] = o * std::tanh(out.c[k]);
    }
    return out;
}

inline Matrix run_direction(const Matrix& seq, const glucast::neural::LstmWeights& w, bool reverse) {
    const std::size_t T = seq.size(), H = w.hidden_size;
    Matrix out(T);
    std::vector<double> h(H, 0.0), c(H, 0.0);
    for (std::size_t step = 0; step < T; ++step) {
        const std::size_t t = reverse ? T - 1 - step : step;
        auto r = cell(seq[t], h, c, w);
        h = r.h;
        c = r.c;
        out[t] = h;
    }
    return out;
}

inline Matrix run_layer(const Matrix& seq, const glucast::neural::RecurrentLayer& layer) {
    Matrix fwd = run_direction(seq, layer.forward, false);
    if (!layer.backward) return fwd;
    Matrix bwd = run_direction(seq, *layer.backward, true);
    for (std::size_t t = 0; t < seq.size(); ++t) fwd[t].insert(fwd[t].end(), bwd[t].begin(), bwd[t].end());
    return fwd;
}

inline Matrix attention(const Matrix& h, const glucast::neural::AttentionWeights& w) {
    const std::size_t T = h.size(), D = w.d_model, A = w.attn_dim;
    Matrix q(T, std::vector<double>(A)), k(T, std::vector<double>(A));
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t a = 0; a < A; ++a) {
            for (std::size_t d = 0; d < D; ++d) {
                q[t][a] += w.wq.data()[a * D + d] * h[t][d];
                k[t][a] += w.wk.data()[a * D + d] * h[t][d];
            }
        }
    }
    Matrix out(T, std::vector<double>(D, 0.0));
    for (std::size_t i = 0; i < T; ++i) {
        std::vector<double> score(T);
        double mx = -1e300;
        for (std::size_t j = 0; j < T; ++j) {
            double s = 0.0;
            for (std::size_t a = 0; a < A; ++a) s += w.v.data()[a] * std::tanh(q[i][a] + k[j][a]);
            score[j] = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (double& s : score) z += (s = std::exp(s - mx));
        for (std::size_t j = 0; j < T; ++j) {
            for (std::size_t d = 0; d < D; ++d) out[i][d] += score[j] / z * h[j][d];
        }
    }
    return out;
}

inline double timeglu(const std::vector<double>& window, const glucast::neural::TimeGluParams& p) {
    Matrix x;
    for (double v : window) x.push_back({v});
    for (const auto& layer : p.encoder) x = run_layer(x, layer);
    if (p.arch.use_attention) {
        const Matrix ctx = attention(x, p.attention);
        for (std::size_t t = 0; t < x.size(); ++t) x[t].insert(x[t].end(), ctx[t].begin(), ctx[t].end());
    }
    const Matrix dec = run_layer(x, p.decoder);
    double y = p.head_b.data()[0];
    for (std::size_t j = 0; j < dec.back().size(); ++j) y += p.head_w.data()[j] * dec.back()[j];
    return y;
}

}  // namespace oracle
