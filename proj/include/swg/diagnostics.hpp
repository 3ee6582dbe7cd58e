#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <utility>
#include <vector>

#include "swg/grid.hpp"
#include "swg/surrogate.hpp"

namespace swg {

// Per-site metric surface; NaN marks sites where the metric is undefined
// (for example the southmost row of the north-south contrasts).
struct MetricMap {
  Eigen::MatrixXd values;  // n_lat x n_lon
};

struct MomentTest {
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double z_skewness = 0.0;   // against SE sqrt(6/K)
  double z_kurtosis = 0.0;   // against SE sqrt(24/K)
};

// Sample skewness/kurtosis with asymptotic normal z-scores; needs K >= 30.
MomentTest moment_tests(const Eigen::Ref<const Eigen::VectorXd>& series);

// Mean squared differences of adjacent residuals, pooled over time and
// realizations. East-west wraps around the circle; north-south starts at the
// second band (first band flagged NaN).
std::pair<MetricMap, MetricMap> contrast_variances(const EnsembleField& residuals);

// Monte Carlo estimate of the model-implied contrast variances from n_sims
// simulated innovation slices.
std::pair<MetricMap, MetricMap> model_contrast_variances(const ModelBundle& bundle,
                                                         int n_sims,
                                                         std::uint64_t seed);

// (loglik_b - loglik_a) / (N * M * K * (R - 1)).
double normalized_loglik_delta(double loglik_a, double loglik_b, Eigen::Index n_lon,
                               Eigen::Index n_lat, Eigen::Index n_time,
                               Eigen::Index n_real);

enum class DeltaMagnitude { negligible, modest, large };

// > 0.1 large, > 0.01 modest but sizable, otherwise negligible.
DeltaMagnitude classify_loglik_delta(double normalized_delta);

// Ordinary least-squares slope of each site series against the time index
// over [k_begin, k_begin + k_length); one map per realization.
std::vector<MetricMap> near_future_trend(const EnsembleField& field,
                                         Eigen::Index k_begin,
                                         Eigen::Index k_length);

// Mean local structural similarity over square sliding windows with the
// standard stabilizing constants; the dynamic range is taken from map_a.
double ssim(const MetricMap& map_a, const MetricMap& map_b, int window = 8);

struct RegionBounds {
  Eigen::Index lat_begin = 0, lat_end = 0;  // half-open
  Eigen::Index lon_begin = 0, lon_end = 0;
};

// Percentiles (in [0,100]) of the finite map values inside a region.
Eigen::VectorXd region_percentiles(const MetricMap& map, const RegionBounds& region,
                                   const std::vector<double>& percentiles);

// Per-site improvement of fit b over fit a in squared distance to the
// empirical metric: (emp - a)^2 - (emp - b)^2; positive favors b.
MetricMap squared_fit_improvement(const MetricMap& empirical, const MetricMap& fit_a,
                                  const MetricMap& fit_b);

void store_metric_csv(const MetricMap& map, const std::filesystem::path& path);

// Map as a one-realization, one-step field container (finite maps only; use
// the CSV form for maps with missing cells).
EnsembleField metric_map_field(const MetricMap& map, const GridSpec& geometry);

}  // namespace swg
