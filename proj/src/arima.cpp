#include "glucast/arima.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "glucast/optim.hpp"

namespace glucast::arima {

namespace {

constexpr double kVarianceFloor = 1e-12;

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> difference(const std::vector<double>& values, int d) {
    if (d < 0) throw UsageError("differencing order must be >= 0");
    if (values.size() <= static_cast<std::size_t>(d)) throw DataError("series too short to difference");
    std::vector<double> out = values;
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
        out.pop_back();
    }
    return out;
}

std::vector<double> integrate(const std::vector<double>& anchors, const std::vector<double>& diffs, int d) {
    if (d < 0 || anchors.size() != static_cast<std::size_t>(d)) {
        throw UsageError("integrate needs exactly d anchors");
    }
    // last[j]: final value of the j-times differenced anchor tail.
    std::vector<double> last(static_cast<std::size_t>(d));
    std::vector<double> level = anchors;
    for (int j = 0; j < d; ++j) {
        last[static_cast<std::size_t>(j)] = level.back();
        for (std::size_t i = 0; i + 1 < level.size(); ++i) level[i] = level[i + 1] - level[i];
        level.pop_back();
    }
    std::vector<double> cur = diffs;
    for (int j = d - 1; j >= 0; --j) {
        double acc = last[static_cast<std::size_t>(j)];
        for (double& v : cur) {
            acc += v;
            v = acc;
        }
    }
    return cur;
}

std::vector<double> css_residuals(const std::vector<double>& phi, const std::vector<double>& theta, double delta,
                                  const std::vector<double>& w) {
    const std::size_t p = phi.size();
    const std::size_t q = theta.size();
    const std::size_t n = w.size();
    std::vector<double> e(n, 0.0);  // e[t] = 0 for t < p (presample)
    for (std::size_t t = p; t < n; ++t) {
        double pred = delta;
        for (std::size_t i = 0; i < p; ++i) pred += phi[i] * w[t - 1 - i];
        for (std::size_t j = 0; j < q && j < t; ++j) pred += theta[j] * e[t - 1 - j];
        e[t] = w[t] - pred;
    }
    return {e.begin() + static_cast<std::ptrdiff_t>(std::min(p, n)), e.end()};
}

double css_loss(const std::vector<double>& phi, const std::vector<double>& theta, double delta,
                const std::vector<double>& w) {
    const std::size_t p = phi.size();
    const std::size_t q = theta.size();
    const std::size_t n = w.size();
    std::vector<double> e(n, 0.0);
    double loss = 0.0;
    for (std::size_t t = p; t < n; ++t) {
        double pred = delta;
        for (std::size_t i = 0; i < p; ++i) pred += phi[i] * w[t - 1 - i];
        for (std::size_t j = 0; j < q && j < t; ++j) pred += theta[j] * e[t - 1 - j];
        e[t] = w[t] - pred;
        loss += e[t] * e[t];
    }
    return loss;
}

bool ar_is_stationary(const std::vector<double>& phi) {
    // Step-down (Schur-Cohn) recursion: stationary iff every reflection coefficient has |k| < 1.
    std::vector<double> a = phi;
    for (std::size_t k = a.size(); k > 0; --k) {
        const double kappa = a[k - 1];
        if (!(std::abs(kappa) < 1.0)) return false;
        std::vector<double> next(k - 1);
        const double denom = 1.0 - kappa * kappa;
        for (std::size_t j = 0; j + 1 < k; ++j) next[j] = (a[j] + kappa * a[k - 2 - j]) / denom;
        a = std::move(next);
    }
    return true;
}

bool roots_outside(const std::vector<double>& phi, double radius) {
    // Roots of phi(radius * z) are the roots of phi(z) divided by radius.
    std::vector<double> scaled = phi;
    double r = radius;
    for (double& c : scaled) {
        c *= r;
        r *= radius;
    }
    return ar_is_stationary(scaled);
}

namespace {

std::vector<double> negated(const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = -v[i];
    return out;
}

}  // namespace

ArimaModel fit_arima(const std::vector<double>& values, int p, int d, int q) {
    if (p < 0 || d < 0 || q < 0) throw UsageError("ARIMA orders must be >= 0");
    if (static_cast<int>(values.size()) - d <= p + q + 1) {
        throw DataError("insufficient data for ARIMA(" + std::to_string(p) + "," + std::to_string(d) + "," +
                        std::to_string(q) + ")");
    }
    const auto w = difference(values, d);
    const auto up = static_cast<std::size_t>(p);
    const auto uq = static_cast<std::size_t>(q);

    std::vector<double> phi(up), theta(uq);
    auto unpack = [&](std::span<const double> x) {
        std::copy_n(x.begin(), up, phi.begin());
        std::copy_n(x.begin() + p, uq, theta.begin());
        return x[up + uq];
    };
    const optim::Objective objective = [&](std::span<const double> x) {
        const double delta = unpack(x);
        return css_loss(phi, theta, delta, w);
    };
    std::vector<double> start(up + uq + 1, 0.0);
    start.back() = mean(w);
    const auto result = optim::nelder_mead(objective, start);

    ArimaModel m;
    m.p = p;
    m.d = d;
    m.q = q;
    m.delta = unpack(result.x);
    m.phi = phi;
    m.theta = theta;
    m.css = result.value;
    m.converged = result.converged;
    m.n_effective = static_cast<int>(w.size()) - p;
    m.sigma2 = m.css / m.n_effective;
    if (!(m.sigma2 >= kVarianceFloor)) {
        m.sigma2 = kVarianceFloor;
        m.variance_floored = true;
    }
    const double n_eff = m.n_effective;
    const double k = m.parameter_count();
    m.aic = n_eff * std::log(m.sigma2) + 2.0 * k;
    m.bic = n_eff * std::log(m.sigma2) + std::log(n_eff) * k;
    m.stationary = ar_is_stationary(m.phi);
    m.invertible = ar_is_stationary(negated(m.theta));
    return m;
}

ArimaModel fit_arima(const TimeSeries& series, int p, int d, int q) { return fit_arima(series.values(), p, d, q); }

double variance(const std::vector<double>& values) {
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return values.empty() ? 0.0 : ss / static_cast<double>(values.size());
}

double lag1_autocorrelation(const std::vector<double>& values) {
    const double m = mean(values);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        den += (values[i] - m) * (values[i] - m);
        if (i + 1 < values.size()) num += (values[i] - m) * (values[i + 1] - m);
    }
    return den > 0.0 ? num / den : 0.0;
}

// Stop differencing at d when either the lag-1 autocorrelation is already
// below 0.99 or one more difference would not lower the variance.
int select_d(const std::vector<double>& values, int max_d) {
    std::vector<double> w = values;
    for (int d = 0; d < max_d; ++d) {
        if (w.size() < 3) return d;
        const double var = variance(w);
        if (var == 0.0) return d;
        const auto next = difference(w, 1);
        if (lag1_autocorrelation(w) < 0.99 || variance(next) >= var) return d;
        w = next;
    }
    return max_d;
}

AutoArimaResult auto_arima_search(const std::vector<double>& values, const AutoArimaOptions& options) {
    if (options.max_p < 0 || options.max_q < 0 || options.max_d < 0) throw UsageError("negative order bound");
    const int d = select_d(values, options.max_d);
    AutoArimaResult out;
    for (int p = 0; p <= options.max_p; ++p)
        for (int q = 0; q <= options.max_q; ++q) out.candidates.push_back({p, q, false, {}, {}});

    auto fit_one = [&](CandidateFit& c) {
        try {
            c.model = fit_arima(values, c.p, d, c.q);
            if (!std::isfinite(c.model.aic)) {
                c.error = "non-finite AIC";
            } else if (!roots_outside(c.model.phi, kAdmissibleRootRadius) ||
                       !roots_outside(negated(c.model.theta), kAdmissibleRootRadius)) {
                c.error = "AR or MA root near the unit circle";
            } else {
                c.ok = true;
            }
        } catch (const std::exception& e) {
            c.error = e.what();
        }
    };
    const auto n = static_cast<std::ptrdiff_t>(out.candidates.size());
    if (options.parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i) fit_one(out.candidates[static_cast<std::size_t>(i)]);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) fit_one(out.candidates[static_cast<std::size_t>(i)]);
    }

    const CandidateFit* best = nullptr;
    for (const auto& c : out.candidates) {
        if (!c.ok) continue;
        if (!best) {
            best = &c;
            continue;
        }
        const double diff = c.model.aic - best->model.aic;
        if (diff < -1e-9) {
            best = &c;
        } else if (std::abs(diff) < 1e-9) {
            const int size_c = c.p + c.q, size_b = best->p + best->q;
            if (size_c < size_b || (size_c == size_b && c.p < best->p)) best = &c;
        }
    }
    if (!best) {
        std::string msg = "all ARIMA candidate fits failed:";
        for (const auto& c : out.candidates) {
            msg += " (" + std::to_string(c.p) + "," + std::to_string(c.q) + "): " + c.error + ";";
        }
        throw FitError(msg);
    }
    out.best = best->model;
    return out;
}

ArimaModel auto_arima(const TimeSeries& series, const AutoArimaOptions& options) {
    return auto_arima_search(series.values(), options).best;
}

std::vector<double> forecast_values(const ArimaModel& model, const std::vector<double>& history, int k) {
    if (k < 1) throw UsageError("forecast horizon must be >= 1");
    const auto need = static_cast<std::size_t>(std::max(model.p, model.q) + model.d);
    if (history.size() < std::max<std::size_t>(need, static_cast<std::size_t>(model.d) + 1)) {
        throw DataError("insufficient history for ARIMA forecast");
    }
    const auto w_hist = difference(history, model.d);
    const auto p = static_cast<std::size_t>(model.p);
    const auto q = static_cast<std::size_t>(model.q);

    std::vector<double> w = w_hist;
    std::vector<double> e(w.size(), 0.0);
    const auto resid = css_residuals(model.phi, model.theta, model.delta, w_hist);
    std::copy(resid.begin(), resid.end(), e.begin() + static_cast<std::ptrdiff_t>(w.size() - resid.size()));

    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(k));
    for (int h = 0; h < k; ++h) {
        const std::size_t t = w.size();
        double pred = model.delta;
        for (std::size_t i = 0; i < p && i < t; ++i) pred += model.phi[i] * w[t - 1 - i];
        for (std::size_t j = 0; j < q && j < t; ++j) pred += model.theta[j] * e[t - 1 - j];
        w.push_back(pred);
        e.push_back(0.0);
        diffs.push_back(pred);
    }
    const std::vector<double> anchors(history.end() - model.d, history.end());
    return integrate(anchors, diffs, model.d);
}

Forecast forecast_arima(const ArimaModel& model, const TimeSeries& history, int k) {
    return Forecast(history.last_timestamp(), history.interval_s(), forecast_values(model, history.values(), k),
                    ModelId::AutoARIMA);
}

}  // namespace glucast::arima
