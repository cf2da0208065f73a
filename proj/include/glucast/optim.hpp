#pragma once

#include <functional>
#include <span>
#include <vector>

namespace glucast::optim {

using Objective = std::function<double(std::span<const double>)>;

struct NelderMeadOptions {
    double initial_step = 0.1;        // absolute offset of the initial simplex vertices
    double diameter_tolerance = 1e-8;  // stop when max vertex distance from best falls below this
    int max_evaluations_per_dim = 2000;
    int restarts = 1;  // fresh simplex around the best point after convergence
    std::vector<double> lower;  // optional box constraints; trial points are projected
    std::vector<double> upper;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

/**
 * Downhill simplex minimization (reflection 1, expansion 2, contraction 0.5,
 * shrink 0.5). Vertices are ordered by value with ties kept in insertion
 * order, so the result is a deterministic function of the start point.
 * Non-finite objective values are treated as +inf.
 */
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> start, const NelderMeadOptions& options = {});

}  // namespace glucast::optim
