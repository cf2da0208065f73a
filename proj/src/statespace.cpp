#include "glucast/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "glucast/optim.hpp"

namespace glucast::statespace {

double box_cox(double x, double lambda) {
    if (!(x > 0.0)) throw DataError("Box-Cox requires positive input, got " + std::to_string(x));
    if (lambda == 0.0) return std::log(x);
    return (std::pow(x, lambda) - 1.0) / lambda;
}

double inv_box_cox(double z, double lambda, bool* clamped) {
    if (lambda == 0.0) return std::exp(z);
    double base = 1.0 + lambda * z;
    if (!(base > 0.0)) {
        base = 1e-12;
        if (clamped) *clamped = true;
    }
    return std::pow(base, 1.0 / lambda);
}

std::vector<double> lambda_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    return grid;
}

double lambda_criterion(const std::vector<double>& values, double lambda, int block_length) {
    const std::size_t blocks = values.size() / static_cast<std::size_t>(block_length);
    std::vector<double> ratios;
    ratios.reserve(blocks);
    for (std::size_t h = 0; h < blocks; ++h) {
        const auto first = values.begin() + static_cast<std::ptrdiff_t>(h * static_cast<std::size_t>(block_length));
        double mean = 0.0;
        for (auto it = first; it != first + block_length; ++it) mean += *it;
        mean /= block_length;
        double ss = 0.0;
        for (auto it = first; it != first + block_length; ++it) ss += (*it - mean) * (*it - mean);
        const double sd = std::sqrt(ss / block_length);
        ratios.push_back(sd / std::pow(mean, 1.0 - lambda));
    }
    double m = 0.0;
    for (double r : ratios) m += r;
    m /= static_cast<double>(ratios.size());
    double ss = 0.0;
    for (double r : ratios) ss += (r - m) * (r - m);
    const double sd = std::sqrt(ss / static_cast<double>(ratios.size()));
    return m > 0.0 ? sd / m : std::numeric_limits<double>::infinity();
}

LambdaSelection select_lambda(const std::vector<double>& values) {
    LambdaSelection out;
    if (values.size() < 2 * static_cast<std::size_t>(kLambdaBlockLength)) {
        out.warning = true;
        return out;
    }
    for (double v : values) {
        if (!(v > 0.0)) throw DataError("lambda selection requires positive values");
    }
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid()) {
        const double c = lambda_criterion(values, lambda);
        out.criterion.push_back(c);
        if (c <= best) {  // '<=' moves ties to the larger lambda
            best = c;
            out.lambda = lambda;
        }
    }
    return out;
}

LambdaSelection select_lambda(const TimeSeries& series) { return select_lambda(series.values()); }

void BatsConfig::validate(bool trigonometric) const {
    if (arma_p < 0 || arma_p > 2 || arma_q < 0 || arma_q > 2) throw UsageError("ARMA error orders must lie in [0, 2]");
    if (seasonal_periods.size() > 2) throw UsageError("at most two seasonal periods are supported");
    for (int m : seasonal_periods) {
        if (m < 2) throw UsageError("seasonal periods must be >= 2");
    }
    if (trigonometric) {
        if (harmonics.size() != seasonal_periods.size()) {
            throw UsageError("TBATS needs one harmonic count per seasonal period");
        }
        for (std::size_t i = 0; i < harmonics.size(); ++i) {
            if (harmonics[i] < 1) throw UsageError("harmonic count K must be >= 1");
            if (harmonics[i] > seasonal_periods[i] / 2) {
                throw UsageError("harmonic count K=" + std::to_string(harmonics[i]) + " exceeds floor(m/2) for m=" +
                                 std::to_string(seasonal_periods[i]));
            }
        }
    }
}

int BatsModel::parameter_count() const {
    int k = 1;
    if (config.use_trend) ++k;
    if (config.use_damping) ++k;
    k += static_cast<int>(gamma1.size() + gamma2.size() + ar.size() + ma.size());
    return k;
}

int BatsModel::state_dimension() const {
    int dim = 2;
    for (std::size_t i = 0; i < config.seasonal_periods.size(); ++i) {
        dim += trigonometric ? 2 * config.harmonics[i] : config.seasonal_periods[i];
    }
    return dim + static_cast<int>(ar.size() + ma.size());
}

double BatsModel::transform(double x) const { return config.use_box_cox ? box_cox(x, lambda) : x; }

double BatsModel::inverse(double z, bool* clamped) const {
    return config.use_box_cox ? inv_box_cox(z, lambda, clamped) : z;
}

namespace {

struct Params {
    double alpha = 0.5;
    double beta = 0.1;
    double damping = 1.0;
    std::vector<double> gamma1, gamma2, ar, ma;
};

struct State {
    double level = 0.0;
    double trend = 0.0;
    std::vector<std::vector<double>> seasonal;
    std::vector<double> past_d, past_e;
};

struct Layout {
    const BatsConfig& config;
    bool trig;

    std::size_t periods() const { return config.seasonal_periods.size(); }

    std::vector<double> lower() const {
        std::vector<double> lo{0.0};
        if (config.use_trend) lo.push_back(0.0);
        if (config.use_damping) lo.push_back(0.8);
        lo.insert(lo.end(), periods() * (trig ? 2 : 1), 0.0);
        lo.insert(lo.end(), static_cast<std::size_t>(config.arma_p + config.arma_q), -0.99);
        return lo;
    }

    std::vector<double> upper() const {
        std::vector<double> hi{1.0};
        if (config.use_trend) hi.push_back(1.0);
        if (config.use_damping) hi.push_back(1.0);
        hi.insert(hi.end(), periods() * (trig ? 2 : 1), 1.0);
        hi.insert(hi.end(), static_cast<std::size_t>(config.arma_p + config.arma_q), 0.99);
        return hi;
    }

    std::vector<double> start() const {
        std::vector<double> x{0.5};
        if (config.use_trend) x.push_back(0.1);
        if (config.use_damping) x.push_back(0.98);
        x.insert(x.end(), periods() * (trig ? 2 : 1), 0.05);
        x.insert(x.end(), static_cast<std::size_t>(config.arma_p + config.arma_q), 0.0);
        return x;
    }

    void unpack(std::span<const double> x, Params& p) const {
        std::size_t i = 0;
        p.alpha = x[i++];
        p.beta = config.use_trend ? x[i++] : 0.0;
        p.damping = config.use_damping ? x[i++] : 1.0;
        p.gamma1.resize(periods());
        p.gamma2.resize(trig ? periods() : 0);
        for (std::size_t k = 0; k < periods(); ++k) {
            p.gamma1[k] = x[i++];
            if (trig) p.gamma2[k] = x[i++];
        }
        const auto ar_begin = x.begin() + static_cast<std::ptrdiff_t>(i);
        p.ar.assign(ar_begin, ar_begin + config.arma_p);
        i += static_cast<std::size_t>(config.arma_p);
        const auto ma_begin = x.begin() + static_cast<std::ptrdiff_t>(i);
        p.ma.assign(ma_begin, ma_begin + config.arma_q);
    }
};

// Trend line through the means of whole periods in y[0..blocks*m), so that a
// seasonal pattern inside each period cannot tilt the slope.
std::pair<double, double> period_trend_fit(const std::vector<double>& y, std::size_t m, std::size_t blocks) {
    std::vector<double> centres, means;
    for (std::size_t b = 0; b < blocks; ++b) {
        double sum = 0.0;
        for (std::size_t t = b * m; t < (b + 1) * m; ++t) sum += y[t];
        means.push_back(sum / static_cast<double>(m));
        centres.push_back(static_cast<double>(b * m) + (static_cast<double>(m) - 1.0) / 2.0);
    }
    if (blocks < 2) return {means.empty() ? 0.0 : means[0], 0.0};
    double cm = 0.0, mm = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        cm += centres[b];
        mm += means[b];
    }
    cm /= static_cast<double>(blocks);
    mm /= static_cast<double>(blocks);
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        num += (centres[b] - cm) * (means[b] - mm);
        den += (centres[b] - cm) * (centres[b] - cm);
    }
    const double slope = num / den;
    return {mm - slope * cm, slope};
}

State initial_state(const std::vector<double>& y, const BatsConfig& config, bool trig) {
    State st;
    const std::size_t n = y.size();
    int max_period = 0;
    for (int m : config.seasonal_periods) max_period = std::max(max_period, m);

    // Seasonal profiles from the detrended start of the series, one period at a time.
    std::vector<std::vector<double>> profiles;
    std::vector<double> remainder = y;
    if (max_period > 0) {
        const auto period = static_cast<std::size_t>(max_period);
        const std::size_t blocks = std::min<std::size_t>(3, n / period);
        const std::size_t window = blocks * period;
        const auto [intercept, slope] = period_trend_fit(y, period, blocks);
        for (std::size_t t = 0; t < window; ++t) remainder[t] = y[t] - (intercept + slope * static_cast<double>(t));
        for (int m : config.seasonal_periods) {
            std::vector<double> sum(static_cast<std::size_t>(m), 0.0);
            std::vector<int> count(static_cast<std::size_t>(m), 0);
            for (std::size_t t = 0; t < window; ++t) {
                sum[t % static_cast<std::size_t>(m)] += remainder[t];
                ++count[t % static_cast<std::size_t>(m)];
            }
            double centre = 0.0;
            for (std::size_t ph = 0; ph < sum.size(); ++ph) {
                sum[ph] = count[ph] ? sum[ph] / count[ph] : 0.0;
                centre += sum[ph];
            }
            centre /= m;
            for (double& v : sum) v -= centre;
            for (std::size_t t = 0; t < window; ++t) remainder[t] -= sum[t % static_cast<std::size_t>(m)];
            profiles.push_back(std::move(sum));
        }
    }
    auto seasonal_at = [&](std::size_t t) {
        double s = 0.0;
        for (std::size_t i = 0; i < profiles.size(); ++i) s += profiles[i][t % profiles[i].size()];
        return s;
    };

    st.level = y[0] - seasonal_at(0);
    if (config.use_trend) {
        const std::size_t steps = std::min<std::size_t>(10, n - 1);
        double sum = 0.0;
        for (std::size_t t = 1; t <= steps; ++t) sum += (y[t] - seasonal_at(t)) - (y[t - 1] - seasonal_at(t - 1));
        st.trend = steps ? sum / static_cast<double>(steps) : 0.0;
    }

    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& prof = profiles[i];
        const int m = static_cast<int>(prof.size());
        std::vector<double> s;
        if (!trig) {
            // Ring aligned to time 1: s[k] is the seasonal value for t = 1 + k.
            for (int k = 0; k < m; ++k) s.push_back(prof[static_cast<std::size_t>((1 + k) % m)]);
        } else {
            for (int j = 1; j <= config.harmonics[i]; ++j) {
                const double lam = 2.0 * std::numbers::pi * j / m;
                double A = 0.0, B = 0.0;
                for (int ph = 0; ph < m; ++ph) {
                    A += prof[static_cast<std::size_t>(ph)] * std::cos(lam * ph);
                    B += prof[static_cast<std::size_t>(ph)] * std::sin(lam * ph);
                }
                if (2 * j == m) {
                    A /= m;
                    B = 0.0;
                } else {
                    A *= 2.0 / m;
                    B *= 2.0 / m;
                }
                // State representing t = 1.
                s.push_back(A * std::cos(lam) + B * std::sin(lam));
                s.push_back(-A * std::sin(lam) + B * std::cos(lam));
            }
        }
        st.seasonal.push_back(std::move(s));
    }
    st.past_d.assign(static_cast<std::size_t>(config.arma_p), 0.0);
    st.past_e.assign(static_cast<std::size_t>(config.arma_q), 0.0);
    return st;
}

double seasonal_value(const State& st) {
    double s = 0.0;
    for (const auto& comp : st.seasonal) {
        if (comp.empty()) continue;
        s += comp[0];
    }
    return s;
}

double seasonal_value_trig(const State& st) {
    double s = 0.0;
    for (const auto& comp : st.seasonal)
        for (std::size_t j = 0; j < comp.size(); j += 2) s += comp[j];
    return s;
}

// One transition given the observation-scale innovation d (and e for the MA lag).
void advance(const Params& p, const BatsConfig& config, bool trig, State& st, double d, double e) {
    const double damped = p.damping * st.trend;
    st.level = st.level + damped + p.alpha * d;
    if (config.use_trend) st.trend = damped + p.beta * d;
    for (std::size_t i = 0; i < st.seasonal.size(); ++i) {
        auto& comp = st.seasonal[i];
        if (!trig) {
            comp[0] += p.gamma1[i] * d;
            std::rotate(comp.begin(), comp.begin() + 1, comp.end());
        } else {
            const int m = config.seasonal_periods[i];
            for (std::size_t j = 0; j < comp.size(); j += 2) {
                const double lam = 2.0 * std::numbers::pi * static_cast<double>(j / 2 + 1) / m;
                const double c = std::cos(lam), s = std::sin(lam);
                const double a = comp[j], b = comp[j + 1];
                comp[j] = a * c + b * s + p.gamma1[i] * d;
                comp[j + 1] = -a * s + b * c + p.gamma2[i] * d;
            }
        }
    }
    if (!st.past_d.empty()) {
        std::rotate(st.past_d.rbegin(), st.past_d.rbegin() + 1, st.past_d.rend());
        st.past_d[0] = d;
    }
    if (!st.past_e.empty()) {
        std::rotate(st.past_e.rbegin(), st.past_e.rbegin() + 1, st.past_e.rend());
        st.past_e[0] = e;
    }
}

double arma_mean(const Params& p, const State& st) {
    double v = 0.0;
    for (std::size_t i = 0; i < p.ar.size(); ++i) v += p.ar[i] * st.past_d[i];
    for (std::size_t j = 0; j < p.ma.size(); ++j) v += p.ma[j] * st.past_e[j];
    return v;
}

// Filters y[1..n) from the state at t = 0; returns SSE of one-step errors.
double run_filter(const Params& p, const BatsConfig& config, bool trig, State& st, const std::vector<double>& y,
                  std::vector<double>* one_step) {
    double sse = 0.0;
    for (std::size_t t = 1; t < y.size(); ++t) {
        const double base = st.level + p.damping * st.trend + (trig ? seasonal_value_trig(st) : seasonal_value(st));
        const double arma = arma_mean(p, st);
        const double yhat = base + arma;
        const double d = y[t] - base;
        const double e = y[t] - yhat;
        sse += e * e;
        if (!std::isfinite(sse)) return std::numeric_limits<double>::infinity();
        if (one_step) one_step->push_back(yhat);
        advance(p, config, trig, st, d, e);
    }
    return sse;
}

std::vector<double> transformed(const TimeSeries& series, bool use_box_cox, double lambda) {
    auto y = series.values();
    if (use_box_cox)
        for (double& v : y) v = box_cox(v, lambda);
    return y;
}

void store(BatsModel& m, const Params& p, State st) {
    m.alpha = p.alpha;
    m.beta = p.beta;
    m.damping = p.damping;
    m.gamma1 = p.gamma1;
    m.gamma2 = p.gamma2;
    m.ar = p.ar;
    m.ma = p.ma;
    m.level = st.level;
    m.trend = st.trend;
    m.seasonal = std::move(st.seasonal);
    m.past_d = std::move(st.past_d);
    m.past_e = std::move(st.past_e);
}

Params params_of(const BatsModel& m) {
    Params p;
    p.alpha = m.alpha;
    p.beta = m.beta;
    p.damping = m.damping;
    p.gamma1 = m.gamma1;
    p.gamma2 = m.gamma2;
    p.ar = m.ar;
    p.ma = m.ma;
    return p;
}

void fill_fitted(BatsModel& m, const std::vector<double>& one_step) {
    m.fitted.clear();
    m.fitted.reserve(one_step.size());
    for (double z : one_step) m.fitted.push_back(m.inverse(z));
}

BatsModel fit_impl(const TimeSeries& series, const BatsConfig& config, bool trig) {
    config.validate(trig);
    int max_period = 10;
    for (int m : config.seasonal_periods) max_period = std::max(max_period, m);
    if (series.size() < 2 * static_cast<std::size_t>(max_period)) {
        throw DataError("BATS needs at least " + std::to_string(2 * max_period) + " points");
    }

    BatsModel model;
    model.config = config;
    model.trigonometric = trig;
    model.lambda = config.use_box_cox ? select_lambda(series).lambda : 1.0;
    const auto y = transformed(series, config.use_box_cox, model.lambda);
    const State init = initial_state(y, config, trig);

    const Layout layout{config, trig};
    Params params;
    const optim::Objective objective = [&](std::span<const double> x) {
        layout.unpack(x, params);
        State st = init;
        return run_filter(params, config, trig, st, y, nullptr);
    };
    optim::NelderMeadOptions options;
    options.lower = layout.lower();
    options.upper = layout.upper();
    const auto result = optim::nelder_mead(objective, layout.start(), options);
    layout.unpack(result.x, params);

    State st = init;
    std::vector<double> one_step;
    model.sse = run_filter(params, config, trig, st, y, &one_step);
    store(model, params, std::move(st));
    fill_fitted(model, one_step);
    model.converged = result.converged;
    model.n_effective = static_cast<int>(y.size()) - 1;
    const double sigma2 = std::max(model.sse / model.n_effective, 1e-12);
    model.aic = model.n_effective * std::log(sigma2) + 2.0 * model.parameter_count();
    model.last_timestamp = series.last_timestamp();
    model.interval_s = series.interval_s();
    return model;
}

}  // namespace

BatsModel bats_fit(const TimeSeries& series, const BatsConfig& config) { return fit_impl(series, config, false); }

BatsModel tbats_fit(const TimeSeries& series, const BatsConfig& config) { return fit_impl(series, config, true); }

BatsModel fit_select_arma(const TimeSeries& series, const BatsConfig& config, bool trigonometric) {
    config.validate(trigonometric);
    BatsModel best;
    bool have = false;
    for (int p = 0; p <= config.arma_p; ++p) {
        for (int q = 0; q <= config.arma_q; ++q) {
            BatsConfig c = config;
            c.arma_p = p;
            c.arma_q = q;
            BatsModel m = fit_impl(series, c, trigonometric);
            if (!std::isfinite(m.aic)) continue;
            if (!have || m.aic < best.aic - 1e-9) {
                best = std::move(m);
                have = true;
            }
        }
    }
    if (!have) throw FitError("no BATS candidate produced a finite AIC");
    return best;
}

BatsModel condition(const BatsModel& model, const TimeSeries& history) {
    int max_period = 10;
    for (int m : model.config.seasonal_periods) max_period = std::max(max_period, m);
    if (history.size() < 2) throw DataError("history too short for BATS conditioning");
    BatsModel out = model;
    const auto y = transformed(history, model.config.use_box_cox, model.lambda);
    State st = initial_state(y, model.config, model.trigonometric);
    const Params p = params_of(model);
    std::vector<double> one_step;
    out.sse = run_filter(p, model.config, model.trigonometric, st, y, &one_step);
    store(out, p, std::move(st));
    fill_fitted(out, one_step);
    out.n_effective = static_cast<int>(y.size()) - 1;
    out.last_timestamp = history.last_timestamp();
    out.interval_s = history.interval_s();
    return out;
}

Forecast forecast_bats(const BatsModel& model, int k) {
    if (k < 1) throw UsageError("forecast horizon must be >= 1");
    const Params p = params_of(model);
    State st{model.level, model.trend, model.seasonal, model.past_d, model.past_e};
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(k));
    bool clamped = false;
    for (int h = 0; h < k; ++h) {
        const double base = st.level + p.damping * st.trend +
                            (model.trigonometric ? seasonal_value_trig(st) : seasonal_value(st));
        const double d = arma_mean(p, st);
        values.push_back(model.inverse(base + d, &clamped));
        advance(p, model.config, model.trigonometric, st, d, 0.0);
    }
    Forecast f(model.last_timestamp, model.interval_s, std::move(values),
               model.trigonometric ? ModelId::TBATS : ModelId::BATS);
    f.flagged = f.flagged || clamped;
    return f;
}

}  // namespace glucast::statespace
