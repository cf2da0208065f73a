#include "glucast/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace glucast::optim {

namespace {

struct Problem {
    const Objective& f;
    const NelderMeadOptions& options;
    int evaluations = 0;
    int budget = 0;

    void project(std::vector<double>& x) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (i < options.lower.size()) x[i] = std::max(x[i], options.lower[i]);
            if (i < options.upper.size()) x[i] = std::min(x[i], options.upper[i]);
        }
    }

    double eval(std::vector<double>& x) {
        project(x);
        ++evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    }

    bool exhausted() const { return evaluations >= budget; }
};

double diameter(const std::vector<std::vector<double>>& simplex) {
    double best = 0.0;
    for (std::size_t j = 1; j < simplex.size(); ++j) {
        double d2 = 0.0;
        for (std::size_t i = 0; i < simplex[0].size(); ++i) {
            const double d = simplex[j][i] - simplex[0][i];
            d2 += d * d;
        }
        best = std::max(best, std::sqrt(d2));
    }
    return best;
}

// One simplex run from `start`. Returns whether the diameter criterion was met.
bool run(Problem& pb, std::vector<double>& best_x, double& best_f) {
    const std::size_t n = best_x.size();
    std::vector<std::vector<double>> simplex(n + 1, best_x);
    std::vector<double> values(n + 1);
    values[0] = pb.eval(simplex[0]);
    for (std::size_t i = 0; i < n; ++i) {
        simplex[i + 1][i] += pb.options.initial_step;
        // Bounded coordinate at its upper limit: step inward instead.
        if (i < pb.options.upper.size() && simplex[i + 1][i] > pb.options.upper[i]) {
            simplex[i + 1][i] = best_x[i] - pb.options.initial_step;
        }
        values[i + 1] = pb.eval(simplex[i + 1]);
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    bool converged = false;
    while (!pb.exhausted()) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        {
            std::vector<std::vector<double>> s2(n + 1);
            std::vector<double> v2(n + 1);
            for (std::size_t k = 0; k <= n; ++k) {
                s2[k] = std::move(simplex[order[k]]);
                v2[k] = values[order[k]];
            }
            simplex = std::move(s2);
            values = std::move(v2);
        }
        if (diameter(simplex) < pb.options.diameter_tolerance) {
            converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i];
        for (double& c : centroid) c /= static_cast<double>(n);

        const auto& worst = simplex[n];
        for (std::size_t i = 0; i < n; ++i) trial[i] = centroid[i] + (centroid[i] - worst[i]);
        const double fr = pb.eval(trial);

        if (fr < values[0]) {
            for (std::size_t i = 0; i < n; ++i) trial2[i] = centroid[i] + 2.0 * (centroid[i] - worst[i]);
            const double fe = pb.eval(trial2);
            if (fe < fr) {
                simplex[n] = trial2;
                values[n] = fe;
            } else {
                simplex[n] = trial;
                values[n] = fr;
            }
        } else if (fr < values[n - 1]) {
            simplex[n] = trial;
            values[n] = fr;
        } else {
            const bool outside = fr < values[n];
            for (std::size_t i = 0; i < n; ++i) {
                trial2[i] = outside ? centroid[i] + 0.5 * (trial[i] - centroid[i])
                                    : centroid[i] + 0.5 * (worst[i] - centroid[i]);
            }
            const double fc = pb.eval(trial2);
            if (fc < std::min(fr, values[n])) {
                simplex[n] = trial2;
                values[n] = fc;
            } else {
                for (std::size_t k = 1; k <= n; ++k) {
                    for (std::size_t i = 0; i < n; ++i) {
                        simplex[k][i] = simplex[0][i] + 0.5 * (simplex[k][i] - simplex[0][i]);
                    }
                    values[k] = pb.eval(simplex[k]);
                }
            }
        }
    }
    const auto it = std::min_element(values.begin(), values.end());
    const auto idx = static_cast<std::size_t>(it - values.begin());
    if (values[idx] <= best_f) {
        best_f = values[idx];
        best_x = simplex[idx];
    }
    return converged;
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options) {
    Problem pb{f, options};
    pb.budget = options.max_evaluations_per_dim * std::max<int>(1, static_cast<int>(start.size()));
    NelderMeadResult result;
    if (start.empty()) {
        result.value = pb.eval(start);
        result.evaluations = pb.evaluations;
        result.converged = true;
        return result;
    }
    pb.project(start);
    result.x = start;
    result.value = std::numeric_limits<double>::infinity();
    result.converged = run(pb, result.x, result.value);
    for (int r = 0; r < options.restarts && result.converged && !pb.exhausted(); ++r) {
        const double before = result.value;
        result.converged = run(pb, result.x, result.value);
        if (!(result.value < before - 1e-12 * (1.0 + std::abs(before)))) break;
    }
    result.evaluations = pb.evaluations;
    return result;
}

}  // namespace glucast::optim
