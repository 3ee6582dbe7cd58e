#include "swg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "swg/stats.hpp"

namespace swg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

MomentTest moment_tests(const Eigen::Ref<const Eigen::VectorXd>& series) {
  const Eigen::Index k = series.size();
  if (k < 30) throw config_error("moment_tests: need at least 30 observations");
  if (!series.array().isFinite().all())
    throw data_error("moment_tests: non-finite value");
  const SampleMoments m = sample_moments(series);  // throws on constant input
  MomentTest out;
  out.skewness = m.skewness;
  out.excess_kurtosis = m.excess_kurtosis;
  out.z_skewness = m.skewness / std::sqrt(6.0 / double(k));
  out.z_kurtosis = m.excess_kurtosis / std::sqrt(24.0 / double(k));
  return out;
}

std::pair<MetricMap, MetricMap> contrast_variances(const EnsembleField& residuals) {
  const GridSpec& spec = residuals.spec();
  MetricMap ew, ns;
  ew.values.setZero(spec.n_lat, spec.n_lon);
  ns.values.setZero(spec.n_lat, spec.n_lon);
  ns.values.row(0).setConstant(kNaN);

  const double scale = 1.0 / double(spec.n_time * spec.n_real);
  for (Eigen::Index r = 0; r < spec.n_real; ++r) {
    for (Eigen::Index k = 0; k < spec.n_time; ++k) {
      for (Eigen::Index m = 0; m < spec.n_lat; ++m) {
        const auto row = residuals.lon_row(r, k, m);
        for (Eigen::Index n = 0; n < spec.n_lon; ++n) {
          const double d =
              row[n] - row[(n - 1 + spec.n_lon) % spec.n_lon];  // wraps
          ew.values(m, n) += scale * d * d;
        }
        if (m >= 1) {
          const auto south = residuals.lon_row(r, k, m - 1);
          for (Eigen::Index n = 0; n < spec.n_lon; ++n) {
            const double d = row[n] - south[n];
            ns.values(m, n) += scale * d * d;
          }
        }
      }
    }
  }
  return {std::move(ew), std::move(ns)};
}

std::pair<MetricMap, MetricMap> model_contrast_variances(const ModelBundle& bundle,
                                                         int n_sims,
                                                         std::uint64_t seed) {
  if (n_sims < 10)
    throw config_error("model_contrast_variances: need at least 10 simulations");
  const EnsembleField slices =
      simulate_innovation_field(bundle, n_sims, seed);
  return contrast_variances(slices);
}

double normalized_loglik_delta(double loglik_a, double loglik_b, Eigen::Index n_lon,
                               Eigen::Index n_lat, Eigen::Index n_time,
                               Eigen::Index n_real) {
  if (n_lon < 1 || n_lat < 1 || n_time < 1 || n_real < 2)
    throw config_error("normalized_loglik_delta: needs N, M, K >= 1 and R >= 2");
  return (loglik_b - loglik_a) /
         (double(n_lon) * double(n_lat) * double(n_time) * double(n_real - 1));
}

DeltaMagnitude classify_loglik_delta(double normalized_delta) {
  const double v = std::abs(normalized_delta);
  if (v > 0.1) return DeltaMagnitude::large;
  if (v > 0.01) return DeltaMagnitude::modest;
  return DeltaMagnitude::negligible;
}

std::vector<MetricMap> near_future_trend(const EnsembleField& field,
                                         Eigen::Index k_begin,
                                         Eigen::Index k_length) {
  const GridSpec& spec = field.spec();
  if (k_length < 24) throw config_error("near_future_trend: window shorter than 24");
  if (k_begin < 0 || k_begin + k_length > spec.n_time)
    throw config_error("near_future_trend: window outside the time axis");

  // OLS slope against centered time index: sum((t - tbar) x_t) / sum((t - tbar)^2)
  Eigen::VectorXd t_centered(k_length);
  for (Eigen::Index i = 0; i < k_length; ++i)
    t_centered[i] = double(i) - 0.5 * double(k_length - 1);
  const double denom = t_centered.squaredNorm();

  std::vector<MetricMap> out(static_cast<std::size_t>(spec.n_real));
  for (Eigen::Index r = 0; r < spec.n_real; ++r) {
    out[static_cast<std::size_t>(r)].values.setZero(spec.n_lat, spec.n_lon);
    for (Eigen::Index m = 0; m < spec.n_lat; ++m) {
      for (Eigen::Index n = 0; n < spec.n_lon; ++n) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < k_length; ++i)
          acc += t_centered[i] * field(r, k_begin + i, m, n);
        out[static_cast<std::size_t>(r)].values(m, n) = acc / denom;
      }
    }
  }
  return out;
}

double ssim(const MetricMap& map_a, const MetricMap& map_b, int window) {
  const Eigen::MatrixXd& a = map_a.values;
  const Eigen::MatrixXd& b = map_b.values;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw data_error("ssim: shape mismatch");
  if (window < 1) throw config_error("ssim: window must be >= 1");
  const Eigen::Index w =
      std::min<Eigen::Index>(window, std::min(a.rows(), a.cols()));
  if (!a.array().isFinite().all() || !b.array().isFinite().all())
    throw data_error("ssim: non-finite map value");

  double range = a.maxCoeff() - a.minCoeff();
  if (!(range > 0.0)) range = 1.0;  // constant reference map
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);

  double total = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i + w <= a.rows(); ++i) {
    for (Eigen::Index j = 0; j + w <= a.cols(); ++j) {
      const auto block_a = a.block(i, j, w, w).array();
      const auto block_b = b.block(i, j, w, w).array();
      const double mu_a = block_a.mean();
      const double mu_b = block_b.mean();
      const double var_a = (block_a - mu_a).square().mean();
      const double var_b = (block_b - mu_b).square().mean();
      const double cov = ((block_a - mu_a) * (block_b - mu_b)).mean();
      const double value = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2) /
                           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      total += value;
      ++count;
    }
  }
  return total / double(count);
}

Eigen::VectorXd region_percentiles(const MetricMap& map, const RegionBounds& region,
                                   const std::vector<double>& percentiles) {
  if (region.lat_begin < 0 || region.lat_end > map.values.rows() ||
      region.lon_begin < 0 || region.lon_end > map.values.cols() ||
      region.lat_begin >= region.lat_end || region.lon_begin >= region.lon_end)
    throw config_error("region_percentiles: bad region bounds");
  std::vector<double> pool;
  for (Eigen::Index m = region.lat_begin; m < region.lat_end; ++m)
    for (Eigen::Index n = region.lon_begin; n < region.lon_end; ++n)
      if (std::isfinite(map.values(m, n))) pool.push_back(map.values(m, n));
  if (pool.empty()) throw data_error("region_percentiles: no finite values in region");
  Eigen::VectorXd out(static_cast<Eigen::Index>(percentiles.size()));
  for (std::size_t i = 0; i < percentiles.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = sample_quantile(pool, percentiles[i] / 100.0);
  return out;
}

MetricMap squared_fit_improvement(const MetricMap& empirical, const MetricMap& fit_a,
                                  const MetricMap& fit_b) {
  if (empirical.values.rows() != fit_a.values.rows() ||
      empirical.values.cols() != fit_a.values.cols() ||
      empirical.values.rows() != fit_b.values.rows() ||
      empirical.values.cols() != fit_b.values.cols())
    throw data_error("squared_fit_improvement: shape mismatch");
  MetricMap out;
  const auto da = (empirical.values - fit_a.values).array();
  const auto db = (empirical.values - fit_b.values).array();
  out.values = (da.square() - db.square()).matrix();
  return out;
}

EnsembleField metric_map_field(const MetricMap& map, const GridSpec& geometry) {
  if (map.values.rows() != geometry.n_lat || map.values.cols() != geometry.n_lon)
    throw data_error("metric_map_field: map does not match the grid");
  if (!map.values.array().isFinite().all())
    throw data_error("metric_map_field: map has missing cells; use the CSV form");
  GridSpec spec = geometry;
  spec.n_real = 1;
  spec.n_time = 1;
  spec.time_labels = {"map"};
  EnsembleField out(spec);
  for (Eigen::Index m = 0; m < spec.n_lat; ++m)
    for (Eigen::Index n = 0; n < spec.n_lon; ++n) out(0, 0, m, n) = map.values(m, n);
  return out;
}

void store_metric_csv(const MetricMap& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("store_metric_csv: cannot open '" + path.string() + "'");
  out << "lat_index,lon_index,value\n";
  out.precision(17);
  for (Eigen::Index m = 0; m < map.values.rows(); ++m)
    for (Eigen::Index n = 0; n < map.values.cols(); ++n) {
      out << m << ',' << n << ',';
      if (std::isfinite(map.values(m, n)))
        out << map.values(m, n);
      else
        out << "NA";
      out << '\n';
    }
  if (!out) throw data_error("store_metric_csv: write failed");
}

}  // namespace swg
