#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "swg/errors.hpp"

namespace swg {

// Tukey g-and-h transform of a standard normal variate:
//
//   tau_{g,h}(z) = (exp(g z) - 1)/g * exp(h z^2 / 2)     g != 0
//                = z * exp(h z^2 / 2)                    g == 0
//
// g sets skewness, h tail weight. The transform is strictly increasing for
// h >= 0, which is the only regime supported here; h is further capped below
// 1/2 so the marginal variance stays finite.

inline constexpr double kTukeyHMax = 0.45;

// Below this |g| the (exp(gz)-1)/g factor is evaluated through its series
// z*(1 + gz/2) to sidestep cancellation.
inline constexpr double kTukeySmallG = 1e-7;

struct TukeySiteParams {
  double xi = 0.0;     // location
  double omega = 1.0;  // scale, > 0
  double g = 0.0;      // skewness
  double h = 0.0;      // tail weight, in [0, h_max]

  void validate(double h_max = kTukeyHMax) const {
    if (!(omega > 0.0) || !std::isfinite(omega))
      throw config_error("Tukey params: omega must be positive and finite");
    if (!std::isfinite(xi) || !std::isfinite(g) || !std::isfinite(h))
      throw config_error("Tukey params: non-finite value");
    if (h < 0.0 || h > h_max)
      throw config_error("Tukey params: h outside [0, " + std::to_string(h_max) + "]");
  }
};

template <class T>
T tgh_transform(T z, T g, T h) {
  if (h < T(0)) throw config_error("tgh_transform: h < 0 is not invertible");
  const T tail = std::exp(h * z * z / T(2));
  if (std::abs(g) < T(kTukeySmallG)) return z * (T(1) + g * z / T(2)) * tail;
  return std::expm1(g * z) / g * tail;
}

// d tau / dz; strictly positive for h >= 0.
template <class T>
T tgh_derivative(T z, T g, T h) {
  if (h < T(0)) throw config_error("tgh_derivative: h < 0 is not invertible");
  const T tail = std::exp(h * z * z / T(2));
  if (std::abs(g) < T(kTukeySmallG)) {
    // derivative of z*(1 + gz/2)*exp(h z^2/2)
    return tail * (T(1) + g * z + h * z * z * (T(1) + g * z / T(2)));
  }
  const T growth = std::expm1(g * z) / g;  // same sign as z
  return tail * (std::exp(g * z) + h * z * growth);
}

namespace detail {

// Monotone root solve of tau(z) = y for y >= 0, g arbitrary sign, h >= 0.
// Bracket doubling followed by Newton steps clipped to the bracket.
inline double tgh_inverse_positive(double y, double g, double h, double tol) {
  double lo = 0.0;
  double hi = 1.0;
  double f_hi = tgh_transform(hi, g, h) - y;
  int expansions = 0;
  while (f_hi < 0.0) {
    lo = hi;
    hi *= 2.0;
    const double t = tgh_transform(hi, g, h);
    f_hi = std::isfinite(t) ? t - y : std::numeric_limits<double>::infinity();
    if (++expansions > 200)
      throw numeric_error("tgh_inverse: bracket expansion failed at z=" +
                          std::to_string(hi));
  }

  double z = std::min(std::max(0.5 * (lo + hi), lo), hi);
  for (int it = 0; it < 200; ++it) {
    const double f = tgh_transform(z, g, h) - y;
    if (std::abs(f) <= tol * std::max(1.0, std::abs(y))) return z;
    if (f > 0.0)
      hi = z;
    else
      lo = z;
    const double d = tgh_derivative(z, g, h);
    double next = z - f / d;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (next == z) next = 0.5 * (lo + hi);  // stalled in floating point
    z = next;
  }
  throw numeric_error("tgh_inverse: no convergence, bracket [" +
                      std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace detail

// Inverse transform: the unique z with tau_{g,h}(z) = y, solved to
// |tau(z) - y| <= tol * max(1, |y|).
inline double tgh_inverse(double y, double g, double h, double tol = 1e-12) {
  if (h < 0.0) throw config_error("tgh_inverse: h < 0 is not invertible");
  if (!(tol > 0.0)) throw config_error("tgh_inverse: tol must be positive");
  if (y == 0.0) return 0.0;
  if (g == 0.0 && h == 0.0) return y;
  // tau_{-g,h}(-z) = -tau_{g,h}(z), so the negative side mirrors exactly.
  if (y < 0.0) return -detail::tgh_inverse_positive(-y, -g, h, tol);
  return detail::tgh_inverse_positive(y, g, h, tol);
}

// Log density of Y = xi + omega * tau_{g,h}(Z), Z standard normal, by exact
// change of variables with numerical inversion.
inline double tgh_log_density(double y, const TukeySiteParams& params,
                              double tol = 1e-12) {
  params.validate();
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  const double standardized = (y - params.xi) / params.omega;
  const double z = tgh_inverse(standardized, params.g, params.h, tol);
  return -0.5 * z * z - kLogSqrt2Pi - std::log(params.omega) -
         std::log(tgh_derivative(z, params.g, params.h));
}

}  // namespace swg
