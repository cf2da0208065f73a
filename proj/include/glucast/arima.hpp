#pragma once

#include <string>
#include <vector>

#include "glucast/core.hpp"

namespace glucast::arima {

struct ArimaModel {
    int p = 0;
    int d = 0;
    int q = 0;
    std::vector<double> phi;    // AR coefficients, phi[0] multiplies w_{t-1}
    std::vector<double> theta;  // MA coefficients, theta[0] multiplies e_{t-1}
    double delta = 0.0;         // intercept on the differenced scale
    double sigma2 = 0.0;
    double css = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    int n_effective = 0;
    bool stationary = true;          // AR roots outside the unit circle
    bool invertible = true;          // MA roots outside the unit circle
    bool converged = true;           // Nelder-Mead met the diameter criterion
    bool variance_floored = false;   // sigma2 hit the 1e-12 floor

    int parameter_count() const { return p + q + 1; }
};

/// Applies the first-difference operator d times; length shrinks by d.
std::vector<double> difference(const std::vector<double>& values, int d);

/**
 * Inverse of difference for forecasts: `anchors` are the last d values of
 * the original series at successive difference levels' source, i.e. the
 * trailing d points of x. Returns the continuation of x implied by `diffs`.
 */
std::vector<double> integrate(const std::vector<double>& anchors, const std::vector<double>& diffs, int d);

/// Conditional residuals e_t, t = p..n-1, with zero presample errors.
std::vector<double> css_residuals(const std::vector<double>& phi, const std::vector<double>& theta, double delta,
                                  const std::vector<double>& w);

/// Sum of squared conditional residuals.
double css_loss(const std::vector<double>& phi, const std::vector<double>& theta, double delta,
                const std::vector<double>& w);

/// Fits ARIMA(p,d,q) by minimizing css_loss with Nelder-Mead from phi=0, theta=0, delta=mean(w).
ArimaModel fit_arima(const std::vector<double>& values, int p, int d, int q);
ArimaModel fit_arima(const TimeSeries& series, int p, int d, int q);

struct AutoArimaOptions {
    int max_p = 5;
    int max_d = 2;
    int max_q = 5;
    bool parallel = true;  // OpenMP over candidate fits; selection is order-independent
};

struct CandidateFit {
    int p = 0;
    int q = 0;
    bool ok = false;
    std::string error;
    ArimaModel model;
};

struct AutoArimaResult {
    ArimaModel best;
    std::vector<CandidateFit> candidates;  // row-major over (p, q)
};

/// Lag-1 sample autocorrelation (mean-removed, divisor-consistent).
double lag1_autocorrelation(const std::vector<double>& values);

/// Population variance (divisor n).
double variance(const std::vector<double>& values);

/// Smallest d <= max_d at which the series looks stationary; see arima.cpp for the rule.
int select_d(const std::vector<double>& values, int max_d);

AutoArimaResult auto_arima_search(const std::vector<double>& values, const AutoArimaOptions& options = {});
ArimaModel auto_arima(const TimeSeries& series, const AutoArimaOptions& options = {});

/// Forecasts on the differenced scale (future errors zero), then integrates.
std::vector<double> forecast_values(const ArimaModel& model, const std::vector<double>& history, int k);
Forecast forecast_arima(const ArimaModel& model, const TimeSeries& history, int k);

/// True when all roots of 1 - phi_1 z - ... - phi_p z^p lie outside the unit circle.
bool ar_is_stationary(const std::vector<double>& phi);

/// True when all roots of 1 - phi_1 z - ... lie outside the circle of the given radius.
bool roots_outside(const std::vector<double>& phi, double radius);

/// auto_arima only selects candidates whose AR and MA roots clear this radius.
inline constexpr double kAdmissibleRootRadius = 1.01;

}  // namespace glucast::arima
