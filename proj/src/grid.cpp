#include "swg/grid.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <cmath>
#include <limits>

namespace swg {

namespace {

constexpr Eigen::Index kMaxCells = Eigen::Index(1) << 40;

double wrap360(double x) {
  double w = std::fmod(x, 360.0);
  if (w < 0.0) w += 360.0;
  return w;
}

}  // namespace

void GridSpec::validate() const {
  if (n_lat < 1 || n_lon < 1 || n_time < 1 || n_real < 1)
    throw data_error("GridSpec: all dimensions must be >= 1");
  if (lat_deg.size() != n_lat)
    throw data_error("GridSpec: lat_deg length mismatch");
  if (lon_deg.size() != n_lon)
    throw data_error("GridSpec: lon_deg length mismatch");
  if (static_cast<Eigen::Index>(time_labels.size()) != n_time)
    throw data_error("GridSpec: time_labels length mismatch");
  for (Eigen::Index i = 0; i < n_lat; ++i)
    if (!std::isfinite(lat_deg[i])) throw data_error("GridSpec: non-finite latitude");
  if (n_lat >= 2) {
    const bool increasing = lat_deg[1] > lat_deg[0];
    for (Eigen::Index i = 1; i < n_lat; ++i) {
      const double d = lat_deg[i] - lat_deg[i - 1];
      if (increasing ? !(d > 0.0) : !(d < 0.0))
        throw data_error("GridSpec: latitudes must be strictly monotone");
    }
  }
  if (n_lon >= 2) {
    const double step = wrap360(lon_deg[1] - lon_deg[0]);
    for (Eigen::Index i = 1; i < n_lon; ++i) {
      const double d = wrap360(lon_deg[i] - lon_deg[i - 1]);
      if (std::abs(d - step) > 1e-9)
        throw data_error("GridSpec: longitudes must be equally spaced modulo 360");
    }
  }
  (void)cells();
}

Eigen::Index GridSpec::cells() const {
  const auto r = static_cast<std::int64_t>(n_real);
  const auto k = static_cast<std::int64_t>(n_time);
  const auto m = static_cast<std::int64_t>(n_lat);
  const auto n = static_cast<std::int64_t>(n_lon);
  if (r < 1 || k < 1 || m < 1 || n < 1)
    throw data_error("GridSpec: all dimensions must be >= 1");
  if (r > kMaxCells / k || r * k > kMaxCells / m || r * k * m > kMaxCells / n)
    throw data_error("GridSpec: dimension overflow");
  return r * k * m * n;
}

bool GridSpec::same_geometry(const GridSpec& other) const {
  return n_lat == other.n_lat && n_lon == other.n_lon && n_time == other.n_time &&
         lat_deg == other.lat_deg && lon_deg == other.lon_deg &&
         time_labels == other.time_labels;
}

GridSpec GridSpec::uniform(Eigen::Index n_lat, Eigen::Index n_lon,
                           Eigen::Index n_time, Eigen::Index n_real,
                           double lat_begin_deg, double lat_end_deg) {
  GridSpec spec;
  spec.n_lat = n_lat;
  spec.n_lon = n_lon;
  spec.n_time = n_time;
  spec.n_real = n_real;
  spec.lat_deg = Eigen::VectorXd::LinSpaced(n_lat, lat_begin_deg, lat_end_deg);
  if (n_lat == 1) spec.lat_deg[0] = 0.5 * (lat_begin_deg + lat_end_deg);
  spec.lon_deg.resize(n_lon);
  for (Eigen::Index i = 0; i < n_lon; ++i)
    spec.lon_deg[i] = 360.0 * static_cast<double>(i) / static_cast<double>(n_lon);
  spec.time_labels.resize(static_cast<std::size_t>(n_time));
  for (Eigen::Index k = 0; k < n_time; ++k) {
    const Eigen::Index year = 2006 + k / 12;
    const Eigen::Index month = 1 + k % 12;
    spec.time_labels[static_cast<std::size_t>(k)] =
        std::to_string(year) + (month < 10 ? "-0" : "-") + std::to_string(month);
  }
  spec.validate();
  return spec;
}

std::string to_string(SurfaceClass c) {
  switch (c) {
    case SurfaceClass::ocean: return "ocean";
    case SurfaceClass::land: return "land";
    case SurfaceClass::high_mountain: return "high_mountain";
  }
  throw data_error("SurfaceClass: unknown value");
}

SurfaceClass surface_class_from_string(const std::string& name) {
  if (name == "ocean") return SurfaceClass::ocean;
  if (name == "land") return SurfaceClass::land;
  if (name == "high_mountain") return SurfaceClass::high_mountain;
  throw data_error("SurfaceClass: unknown name '" + name + "'");
}

GeoMask::GeoMask(Eigen::Index n_lat, Eigen::Index n_lon) {
  if (n_lat < 1 || n_lon < 1) throw data_error("GeoMask: dimensions must be >= 1");
  classes_.setZero(n_lat, n_lon);
  altitude_.setZero(n_lat, n_lon);
}

GeoMask GeoMask::from_altitude(const Eigen::MatrixXd& altitude_m) {
  GeoMask mask(altitude_m.rows(), altitude_m.cols());
  for (Eigen::Index m = 0; m < altitude_m.rows(); ++m) {
    for (Eigen::Index n = 0; n < altitude_m.cols(); ++n) {
      const double a = altitude_m(m, n);
      SurfaceClass c = SurfaceClass::ocean;
      if (a > 1000.0)
        c = SurfaceClass::high_mountain;
      else if (a > 0.0)
        c = SurfaceClass::land;
      mask.set(m, n, c, a);
    }
  }
  return mask;
}

void GeoMask::set(Eigen::Index m, Eigen::Index n, SurfaceClass c, double altitude_m) {
  if (!std::isfinite(altitude_m)) throw data_error("GeoMask: non-finite altitude");
  if (c == SurfaceClass::high_mountain && !(altitude_m > 1000.0))
    throw data_error("GeoMask: high_mountain requires altitude > 1000 m");
  classes_(m, n) = static_cast<std::uint8_t>(c);
  altitude_(m, n) = altitude_m;
}

void GeoMask::validate() const {
  if (classes_.rows() < 1 || classes_.cols() < 1)
    throw data_error("GeoMask: empty mask");
  for (Eigen::Index m = 0; m < classes_.rows(); ++m) {
    for (Eigen::Index n = 0; n < classes_.cols(); ++n) {
      if (classes_(m, n) > 2) throw data_error("GeoMask: unknown class value");
      if (!std::isfinite(altitude_(m, n)))
        throw data_error("GeoMask: non-finite altitude");
      if (cls(m, n) == SurfaceClass::high_mountain && !(altitude_(m, n) > 1000.0))
        throw data_error("GeoMask: high_mountain requires altitude > 1000 m");
    }
  }
}

EnsembleField::EnsembleField(GridSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  values_ = Eigen::ArrayXd::Zero(spec_.cells());
}

EnsembleField::EnsembleField(GridSpec spec, Eigen::ArrayXd values)
    : spec_(std::move(spec)), values_(std::move(values)) {
  spec_.validate();
  if (values_.size() != spec_.cells())
    throw data_error("EnsembleField: value count does not match dimensions");
}

Eigen::VectorXd EnsembleField::site_series(Eigen::Index r, Eigen::Index m,
                                           Eigen::Index n) const {
  Eigen::VectorXd out(spec_.n_time);
  const Eigen::Index stride = spec_.n_lat * spec_.n_lon;
  const double* base = values_.data() + index(r, 0, m, n);
  for (Eigen::Index k = 0; k < spec_.n_time; ++k) out[k] = base[k * stride];
  return out;
}

Eigen::MatrixXd EnsembleField::site_series_matrix(Eigen::Index m,
                                                  Eigen::Index n) const {
  Eigen::MatrixXd out(spec_.n_real, spec_.n_time);
  for (Eigen::Index r = 0; r < spec_.n_real; ++r)
    out.row(r) = site_series(r, m, n).transpose();
  return out;
}

void EnsembleField::validate_finite() const {
  if (!values_.isFinite().all())
    throw data_error("EnsembleField: non-finite value in payload");
}

EnsembleField ensemble_mean(const EnsembleField& field) {
  const GridSpec& in = field.spec();
  GridSpec out_spec = in;
  out_spec.n_real = 1;
  EnsembleField out(out_spec);
  const Eigen::Index slab = in.n_time * in.n_lat * in.n_lon;
  Eigen::Map<Eigen::ArrayXd> acc(out.values().data(), slab);
  for (Eigen::Index r = 0; r < in.n_real; ++r)
    acc += Eigen::Map<const Eigen::ArrayXd>(field.values().data() + r * slab, slab);
  acc /= static_cast<double>(in.n_real);
  return out;
}

EnsembleField deviations(const EnsembleField& field, const EnsembleField& mean) {
  const GridSpec& in = field.spec();
  if (mean.spec().n_real != 1 || !in.same_geometry(mean.spec()))
    throw data_error("deviations: mean does not match field geometry");
  EnsembleField out(in);
  const Eigen::Index slab = in.n_time * in.n_lat * in.n_lon;
  Eigen::Map<const Eigen::ArrayXd> mean_view(mean.values().data(), slab);
  for (Eigen::Index r = 0; r < in.n_real; ++r) {
    Eigen::Map<Eigen::ArrayXd> dst(out.values().data() + r * slab, slab);
    dst = Eigen::Map<const Eigen::ArrayXd>(field.values().data() + r * slab, slab) -
          mean_view;
  }
  return out;
}

SmoothedMean smooth_mean(const SmoothedMean& mean, double lambda) {
  if (!(lambda > 0.0) || lambda > 1.0)
    throw config_error("smooth_mean: lambda must lie in (0, 1]");
  const GridSpec& spec = mean.spec();
  if (spec.n_real != 1) throw data_error("smooth_mean: input must have n_real == 1");
  if (lambda == 1.0 || spec.n_time < 3) return mean;

  const Eigen::Index K = spec.n_time;
  const Eigen::Index sites = spec.n_lat * spec.n_lon;

  // Columns are per-site time series: values index (0, k, m, n) has stride
  // sites over k, so a (sites x K) map transposes into the K x sites RHS.
  Eigen::Map<const Eigen::MatrixXd> flat(mean.values().data(), sites, K);
  Eigen::MatrixXd rhs = lambda * flat.transpose();

  // Penalty gradient (1-lambda) * D^T D x vanishing at the input means the
  // input already minimizes the objective; return it untouched.
  {
    bool zero_penalty = true;
    for (Eigen::Index s = 0; s < sites && zero_penalty; ++s) {
      for (Eigen::Index k = 1; k + 1 < K; ++k) {
        const double d2 = flat(s, k - 1) - 2.0 * flat(s, k) + flat(s, k + 1);
        if (d2 != 0.0) {
          zero_penalty = false;
          break;
        }
      }
    }
    if (zero_penalty) return mean;
  }

  const double mu = 1.0 - lambda;
  const auto stencil = [](Eigen::Index q, Eigen::Index col) -> double {
    if (col == q - 1 || col == q + 1) return 1.0;
    if (col == q) return -2.0;
    return 0.0;
  };
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(5 * K));
  for (Eigen::Index i = 0; i < K; ++i) {
    for (Eigen::Index j = std::max<Eigen::Index>(0, i - 2);
         j <= std::min(K - 1, i + 2); ++j) {
      // (D^T D)(i,j) = sum over interior rows q of D(q,i) D(q,j); D row q has
      // the (1, -2, 1) pattern at columns (q-1, q, q+1).
      double v = 0.0;
      const Eigen::Index q_lo = std::max<Eigen::Index>(1, std::max(i, j) - 1);
      const Eigen::Index q_hi = std::min(K - 2, std::min(i, j) + 1);
      for (Eigen::Index q = q_lo; q <= q_hi; ++q) v += stencil(q, i) * stencil(q, j);
      if (v != 0.0 || i == j) trips.emplace_back(i, j, mu * v + (i == j ? lambda : 0.0));
    }
  }
  Eigen::SparseMatrix<double> A(K, K);
  A.setFromTriplets(trips.begin(), trips.end());

  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> solver(A);
  if (solver.info() != Eigen::Success)
    throw numeric_error("smooth_mean: factorization failed");
  const Eigen::MatrixXd solution = solver.solve(rhs);

  SmoothedMean out(spec);
  Eigen::Map<Eigen::MatrixXd> out_flat(out.values().data(), sites, K);
  out_flat = solution.transpose();
  return out;
}

}  // namespace swg
