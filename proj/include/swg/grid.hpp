#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "swg/errors.hpp"

namespace swg {

// Regular latitude-longitude-month grid shared by all field containers.
// Longitudes must be equally spaced modulo 360 degrees so each band admits a
// circular spectral representation.
struct GridSpec {
  Eigen::Index n_lat = 0;   // M
  Eigen::Index n_lon = 0;   // N
  Eigen::Index n_time = 0;  // K
  Eigen::Index n_real = 0;  // R
  Eigen::VectorXd lat_deg;  // length M, strictly monotone
  Eigen::VectorXd lon_deg;  // length N
  std::vector<std::string> time_labels;  // length K, e.g. "2006-01"

  void validate() const;
  Eigen::Index cells() const;  // R*K*M*N with overflow check
  bool same_geometry(const GridSpec& other) const;  // ignores n_real

  static GridSpec uniform(Eigen::Index n_lat, Eigen::Index n_lon,
                          Eigen::Index n_time, Eigen::Index n_real,
                          double lat_begin_deg = -62.0, double lat_end_deg = 62.0);
};

enum class SurfaceClass : std::uint8_t { ocean = 0, land = 1, high_mountain = 2 };

std::string to_string(SurfaceClass c);
SurfaceClass surface_class_from_string(const std::string& name);

// Per-site surface class plus altitude. High mountains are land cells above
// the 1000 m threshold.
class GeoMask {
 public:
  GeoMask() = default;
  GeoMask(Eigen::Index n_lat, Eigen::Index n_lon);

  // Derives classes from altitude alone: >1000 m high mountain, >0 land,
  // otherwise ocean.
  static GeoMask from_altitude(const Eigen::MatrixXd& altitude_m);

  Eigen::Index n_lat() const { return classes_.rows(); }
  Eigen::Index n_lon() const { return classes_.cols(); }

  SurfaceClass cls(Eigen::Index m, Eigen::Index n) const {
    return static_cast<SurfaceClass>(classes_(m, n));
  }
  double altitude(Eigen::Index m, Eigen::Index n) const { return altitude_(m, n); }
  void set(Eigen::Index m, Eigen::Index n, SurfaceClass c, double altitude_m);

  bool is_land_or_mountain(Eigen::Index m, Eigen::Index n) const {
    return cls(m, n) != SurfaceClass::ocean;
  }

  void validate() const;

 private:
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> classes_;
  Eigen::MatrixXd altitude_;
};

// 4-D array of values laid out (realization, time, lat, lon) row-major.
// Carries wind fields, deviations, and residuals alike; values are kept in
// double precision in memory, the container file stores float32.
class EnsembleField {
 public:
  EnsembleField() = default;
  explicit EnsembleField(GridSpec spec);
  EnsembleField(GridSpec spec, Eigen::ArrayXd values);

  const GridSpec& spec() const { return spec_; }
  const Eigen::ArrayXd& values() const { return values_; }
  Eigen::ArrayXd& values() { return values_; }

  Eigen::Index index(Eigen::Index r, Eigen::Index k, Eigen::Index m,
                     Eigen::Index n) const {
    return ((r * spec_.n_time + k) * spec_.n_lat + m) * spec_.n_lon + n;
  }
  double operator()(Eigen::Index r, Eigen::Index k, Eigen::Index m,
                    Eigen::Index n) const {
    return values_[index(r, k, m, n)];
  }
  double& operator()(Eigen::Index r, Eigen::Index k, Eigen::Index m,
                     Eigen::Index n) {
    return values_[index(r, k, m, n)];
  }

  // Time series at one site for one realization (R x K gather is cheap
  // relative to any fit that consumes it).
  Eigen::VectorXd site_series(Eigen::Index r, Eigen::Index m, Eigen::Index n) const;
  // All realizations at one site, rows = realizations.
  Eigen::MatrixXd site_series_matrix(Eigen::Index m, Eigen::Index n) const;
  // Contiguous longitude row.
  Eigen::Map<const Eigen::ArrayXd> lon_row(Eigen::Index r, Eigen::Index k,
                                           Eigen::Index m) const {
    return {values_.data() + index(r, k, m, 0),
            static_cast<Eigen::Index>(spec_.n_lon)};
  }

  void validate_finite() const;

 private:
  GridSpec spec_;
  Eigen::ArrayXd values_;
};

// Smoothed (or plain) ensemble mean: an EnsembleField with n_real == 1.
using SmoothedMean = EnsembleField;

// Mean over realizations, cell-wise; result has n_real == 1.
EnsembleField ensemble_mean(const EnsembleField& field);

// field - mean, cell-wise; deviations sum to zero over realizations.
EnsembleField deviations(const EnsembleField& field, const EnsembleField& mean);

// Per-site penalized smoother over time: minimizes
//   lambda * sum_k (mean - out)^2 + (1-lambda) * sum interior (second diff)^2
// solved as a banded SPD system. lambda = 1 returns the input unchanged.
SmoothedMean smooth_mean(const SmoothedMean& mean, double lambda);

}  // namespace swg
