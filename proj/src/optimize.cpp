#include "swg/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace swg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded(const std::function<double(const Eigen::VectorXd&)>& f,
               const Eigen::VectorXd& x, int& evals) {
  ++evals;
  const double v = f(x);
  return std::isnan(v) ? kInf : v;
}

}  // namespace

OptimResult minimize(const std::function<double(const Eigen::VectorXd&)>& objective,
                     const Eigen::VectorXd& x0, const Eigen::VectorXd& step0,
                     const OptimOptions& options) {
  const Eigen::Index dim = x0.size();
  OptimResult best;
  best.x = x0;
  best.f = guarded(objective, x0, best.evals);

  if (dim == 0) {
    best.converged = true;
    return best;
  }

  // --- Nelder-Mead ---------------------------------------------------------
  const Eigen::Index n_vertices = dim + 1;
  std::vector<Eigen::VectorXd> vertex(static_cast<std::size_t>(n_vertices));
  std::vector<double> value(static_cast<std::size_t>(n_vertices));
  vertex[0] = x0;
  value[0] = best.f;
  for (Eigen::Index i = 0; i < dim; ++i) {
    Eigen::VectorXd v = x0;
    const double s = step0[i] != 0.0 ? step0[i] : 0.1;
    v[i] += s;
    vertex[static_cast<std::size_t>(i + 1)] = v;
    value[static_cast<std::size_t>(i + 1)] = guarded(objective, v, best.evals);
  }

  auto record_best = [&](const Eigen::VectorXd& x, double f) {
    if (f < best.f) {
      best.f = f;
      best.x = x;
    }
  };
  for (Eigen::Index i = 0; i < n_vertices; ++i)
    record_best(vertex[static_cast<std::size_t>(i)], value[static_cast<std::size_t>(i)]);

  std::vector<std::size_t> order(static_cast<std::size_t>(n_vertices));
  std::iota(order.begin(), order.end(), 0u);

  while (best.evals < options.max_evals) {
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second_hi = order[order.size() - 2];

    const double f_lo = value[lo];
    const double f_hi = value[hi];
    if (std::isfinite(f_hi)) {
      const double spread = f_hi - f_lo;
      if (spread <= options.rel_ftol * (std::abs(f_lo) + 1e-300) ||
          spread <= 1e-15 * (1.0 + std::abs(f_lo))) {
        best.converged = true;
        break;
      }
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 0; i < order.size(); ++i)
      if (order[i] != hi) centroid += vertex[order[i]];
    centroid /= static_cast<double>(dim);

    const Eigen::VectorXd reflected = centroid + (centroid - vertex[hi]);
    const double f_ref = guarded(objective, reflected, best.evals);
    record_best(reflected, f_ref);

    if (f_ref < f_lo) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - vertex[hi]);
      const double f_exp = guarded(objective, expanded, best.evals);
      record_best(expanded, f_exp);
      if (f_exp < f_ref) {
        vertex[hi] = expanded;
        value[hi] = f_exp;
      } else {
        vertex[hi] = reflected;
        value[hi] = f_ref;
      }
      continue;
    }
    if (f_ref < value[second_hi]) {
      vertex[hi] = reflected;
      value[hi] = f_ref;
      continue;
    }

    const bool outside = f_ref < f_hi;
    Eigen::VectorXd contracted;
    if (outside)
      contracted = centroid + 0.5 * (reflected - centroid);
    else
      contracted = centroid - 0.5 * (centroid - vertex[hi]);
    const double f_con = guarded(objective, contracted, best.evals);
    record_best(contracted, f_con);
    if (f_con < std::min(f_ref, f_hi)) {
      vertex[hi] = contracted;
      value[hi] = f_con;
      continue;
    }

    // shrink toward the best vertex
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t v = order[i];
      if (v == lo) continue;
      vertex[v] = vertex[lo] + 0.5 * (vertex[v] - vertex[lo]);
      value[v] = guarded(objective, vertex[v], best.evals);
      record_best(vertex[v], value[v]);
      if (best.evals >= options.max_evals) break;
    }
  }

  // --- coordinate-wise golden-section polish --------------------------------
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int pass = 0; pass < options.polish_passes; ++pass) {
    const double width_scale = std::pow(0.25, pass);
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double base_step = step0[i] != 0.0 ? std::abs(step0[i]) : 0.1;
      double a = best.x[i] - base_step * width_scale;
      double b = best.x[i] + base_step * width_scale;
      Eigen::VectorXd probe = best.x;

      double x1 = b - golden * (b - a);
      double x2 = a + golden * (b - a);
      probe[i] = x1;
      double f1 = guarded(objective, probe, best.evals);
      probe[i] = x2;
      double f2 = guarded(objective, probe, best.evals);
      for (int it = 0; it < options.polish_iters; ++it) {
        if (f1 < f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - golden * (b - a);
          probe[i] = x1;
          f1 = guarded(objective, probe, best.evals);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + golden * (b - a);
          probe[i] = x2;
          f2 = guarded(objective, probe, best.evals);
        }
      }
      const double xc = f1 < f2 ? x1 : x2;
      const double fc = std::min(f1, f2);
      if (fc < best.f) {
        best.f = fc;
        best.x[i] = xc;
      }
    }
  }

  return best;
}

}  // namespace swg
