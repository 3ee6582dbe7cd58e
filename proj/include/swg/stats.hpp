#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "swg/errors.hpp"

namespace swg {

// Linear-interpolation sample quantile (the common "type 7" definition).
inline double sample_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw data_error("sample_quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw config_error("sample_quantile: q outside [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;        // denominator n
  double skewness = 0.0;        // m3 / m2^(3/2)
  double excess_kurtosis = 0.0; // m4 / m2^2 - 3
};

inline SampleMoments sample_moments(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() < 2) throw data_error("sample_moments: need at least 2 values");
  const double mean = x.mean();
  const Eigen::ArrayXd d = x.array() - mean;
  const double m2 = d.square().mean();
  if (!(m2 > 0.0)) throw data_error("sample_moments: constant sample");
  const double m3 = d.cube().mean();
  const double m4 = d.square().square().mean();
  SampleMoments out;
  out.mean = mean;
  out.variance = m2;
  out.skewness = m3 / std::pow(m2, 1.5);
  out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  return out;
}

}  // namespace swg
