#pragma once

#include <string>
#include <vector>

#include "glucast/core.hpp"

namespace glucast::statespace {

/// Box-Cox power transform: ln(x) for lambda = 0, else (x^lambda - 1) / lambda.
double box_cox(double x, double lambda);

/// Inverse transform. When 1 + lambda*z <= 0 the result is clamped to the
/// domain edge and `*clamped` (if given) is set.
double inv_box_cox(double z, double lambda, bool* clamped = nullptr);

struct BoxCox {
    double lambda = 1.0;

    double transform(double x) const { return box_cox(x, lambda); }
    double inverse(double z, bool* clamped = nullptr) const { return inv_box_cox(z, lambda, clamped); }
};

struct LambdaSelection {
    double lambda = 1.0;
    bool warning = false;  // series shorter than two blocks; lambda defaulted to 1
    std::vector<double> criterion;  // coefficient of variation per grid lambda (empty on fallback)
};

inline constexpr int kLambdaBlockLength = 24;

/// The lambda grid 0.0, 0.1, ..., 1.0.
std::vector<double> lambda_grid();

/// Guerrero-style stability criterion for one lambda: CV of block std / mean^(1-lambda).
double lambda_criterion(const std::vector<double>& values, double lambda, int block_length = kLambdaBlockLength);

/// Grid search for lambda minimizing lambda_criterion; ties go to the larger lambda.
LambdaSelection select_lambda(const std::vector<double>& values);
LambdaSelection select_lambda(const TimeSeries& series);

struct BatsConfig {
    bool use_box_cox = false;
    bool use_trend = true;
    bool use_damping = false;
    int arma_p = 0;  // <= 2
    int arma_q = 0;  // <= 2
    std::vector<int> seasonal_periods;
    std::vector<int> harmonics;  // TBATS only: K per period

    /// Throws UsageError when the config violates its invariants.
    void validate(bool trigonometric) const;
};

/**
 * Fitted BATS/TBATS model. Parameters live in transformed space; the
 * terminal state describes the step after the last observation.
 */
struct BatsModel {
    BatsConfig config;
    bool trigonometric = false;
    double lambda = 1.0;  // meaningful only with config.use_box_cox

    double alpha = 0.0;
    double beta = 0.0;
    double damping = 1.0;
    std::vector<double> gamma1;  // per period (BATS: the only seasonal gain)
    std::vector<double> gamma2;  // per period, TBATS only
    std::vector<double> ar;
    std::vector<double> ma;

    // Terminal state.
    double level = 0.0;
    double trend = 0.0;
    std::vector<std::vector<double>> seasonal;  // BATS: ring, [0] is next step; TBATS: (a_1, b_1, a_2, b_2, ...)
    std::vector<double> past_d;  // most recent first, length ar.size()
    std::vector<double> past_e;  // most recent first, length ma.size()

    double sse = 0.0;  // in-sample one-step SSE, transformed scale
    double aic = 0.0;
    int n_effective = 0;
    bool converged = true;
    std::int64_t last_timestamp = 0;
    std::int64_t interval_s = kDefaultIntervalSeconds;
    std::vector<double> fitted;  // one-step predictions for points 1..n-1, original scale

    int parameter_count() const;
    int state_dimension() const;
    double transform(double x) const;
    double inverse(double z, bool* clamped = nullptr) const;
};

/// Fixed-order fits. Seasonal periods come from the config (may be empty).
BatsModel bats_fit(const TimeSeries& series, const BatsConfig& config);
BatsModel tbats_fit(const TimeSeries& series, const BatsConfig& config);

/// Fits every ARMA order up to the config's caps and keeps the lowest AIC
/// (ties: smaller p+q, then smaller p).
BatsModel fit_select_arma(const TimeSeries& series, const BatsConfig& config, bool trigonometric);

/// Re-runs the fitted parameters over `history` (fresh initial states) and
/// returns a model whose terminal state follows history's last point.
BatsModel condition(const BatsModel& model, const TimeSeries& history);

/// Iterates the state recursion with zero future errors, then inverts Box-Cox.
Forecast forecast_bats(const BatsModel& model, int k);

}  // namespace glucast::statespace
