#pragma once

#include <Eigen/Core>
#include <functional>

namespace swg {

struct OptimOptions {
  int max_evals = 2000;      // simplex budget
  double rel_ftol = 1e-9;    // relative spread of simplex values
  int polish_passes = 2;     // coordinate-wise golden-section refinement
  int polish_iters = 28;     // golden-section iterations per coordinate
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

// Derivative-free minimization: Nelder-Mead simplex followed by a
// coordinate-wise golden-section polish. Returns the best point seen, so the
// result is never worse than the starting point. The objective may return
// +inf (or NaN, treated as +inf) for infeasible points.
OptimResult minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                     const Eigen::VectorXd& x0, const Eigen::VectorXd& step0,
                     const OptimOptions& options = {});

}  // namespace swg
