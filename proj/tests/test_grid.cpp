#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "swg/errors.hpp"
#include "swg/grid.hpp"
#include "swg/rng.hpp"

using namespace swg;

namespace {

EnsembleField random_field(const GridSpec& spec, std::uint64_t seed) {
  EnsembleField f(spec);
  CounterRng rng(seed, 99);
  for (Eigen::Index i = 0; i < f.values().size(); ++i)
    f.values()[i] = rng.next_normal();
  return f;
}

}  // namespace

TEST_CASE("GridSpec validation") {
  GridSpec spec = GridSpec::uniform(4, 8, 6, 2);
  CHECK_NOTHROW(spec.validate());

  GridSpec bad = spec;
  bad.lat_deg[2] = bad.lat_deg[1];  // not strictly monotone
  CHECK_THROWS_AS(bad.validate(), data_error);

  bad = spec;
  bad.lon_deg[3] += 0.5;  // unequal spacing
  CHECK_THROWS_AS(bad.validate(), data_error);

  bad = spec;
  bad.n_time = 0;
  CHECK_THROWS_AS(bad.validate(), data_error);
}

TEST_CASE("ensemble_mean identity for a single run") {
  const GridSpec spec = GridSpec::uniform(3, 6, 5, 1);
  const EnsembleField f = random_field(spec, 1);
  const EnsembleField mean = ensemble_mean(f);
  CHECK(mean.spec().n_real == 1);
  CHECK((mean.values() == f.values()).all());
}

TEST_CASE("ensemble_mean of mirrored runs vanishes") {
  GridSpec spec = GridSpec::uniform(3, 6, 5, 2);
  EnsembleField f(spec);
  CounterRng rng(2, 99);
  const Eigen::Index slab = spec.n_time * spec.n_lat * spec.n_lon;
  for (Eigen::Index i = 0; i < slab; ++i) {
    const double v = rng.next_normal();
    f.values()[i] = v;
    f.values()[slab + i] = -v;
  }
  const EnsembleField mean = ensemble_mean(f);
  CHECK(mean.values().abs().maxCoeff() == 0.0);
}

TEST_CASE("ensemble_mean matches a naive loop oracle") {
  const GridSpec spec = GridSpec::uniform(4, 7, 9, 5);
  const EnsembleField f = random_field(spec, 3);
  const EnsembleField mean = ensemble_mean(f);
  for (Eigen::Index k = 0; k < spec.n_time; ++k)
    for (Eigen::Index m = 0; m < spec.n_lat; ++m)
      for (Eigen::Index n = 0; n < spec.n_lon; ++n) {
        double acc = 0.0;
        for (Eigen::Index r = 0; r < spec.n_real; ++r) acc += f(r, k, m, n);
        CHECK(mean(0, k, m, n) ==
              doctest::Approx(acc / double(spec.n_real)).epsilon(1e-15));
      }
}

TEST_CASE("deviations of identical runs vanish and forced arithmetic holds") {
  GridSpec spec = GridSpec::uniform(2, 4, 3, 2);
  EnsembleField f(spec);
  f.values().setConstant(7.25);
  const EnsembleField dev = deviations(f, ensemble_mean(f));
  CHECK(dev.values().abs().maxCoeff() == 0.0);

  EnsembleField g(spec);
  g.values().setConstant(1.0);
  const Eigen::Index slab = spec.n_time * spec.n_lat * spec.n_lon;
  for (Eigen::Index i = 0; i < slab; ++i) g.values()[slab + i] = 3.0;
  const EnsembleField dg = deviations(g, ensemble_mean(g));
  CHECK(dg(0, 0, 0, 0) == -1.0);
  CHECK(dg(1, 0, 0, 0) == 1.0);
}

TEST_CASE("deviations sum to zero across realizations") {
  const GridSpec spec = GridSpec::uniform(4, 7, 9, 5);
  const EnsembleField f = random_field(spec, 4);
  const EnsembleField dev = deviations(f, ensemble_mean(f));
  for (Eigen::Index k = 0; k < spec.n_time; ++k)
    for (Eigen::Index m = 0; m < spec.n_lat; ++m)
      for (Eigen::Index n = 0; n < spec.n_lon; ++n) {
        double acc = 0.0;
        for (Eigen::Index r = 0; r < spec.n_real; ++r) acc += dev(r, k, m, n);
        CHECK(std::abs(acc) <= 1e-10);
      }
}

TEST_CASE("deviations rejects mismatched geometry") {
  const EnsembleField f = random_field(GridSpec::uniform(3, 6, 5, 2), 5);
  const EnsembleField wrong = random_field(GridSpec::uniform(3, 6, 4, 1), 5);
  CHECK_THROWS_AS(deviations(f, wrong), data_error);
}

TEST_CASE("smooth_mean lambda = 1 is the exact identity") {
  const EnsembleField mean = random_field(GridSpec::uniform(2, 5, 20, 1), 6);
  const EnsembleField out = smooth_mean(mean, 1.0);
  CHECK((out.values() == mean.values()).all());
}

TEST_CASE("smooth_mean keeps a linear-in-time series fixed") {
  GridSpec spec = GridSpec::uniform(1, 2, 16, 1);
  EnsembleField mean(spec);
  for (Eigen::Index k = 0; k < spec.n_time; ++k)
    for (Eigen::Index n = 0; n < spec.n_lon; ++n)
      mean(0, k, 0, n) = 3.0 * double(k) + double(n);  // exact in floating point
  const EnsembleField out = smooth_mean(mean, 0.25);
  CHECK((out.values() == mean.values()).all());
}

TEST_CASE("smooth_mean matches a dense normal-equations oracle at K = 5") {
  GridSpec spec = GridSpec::uniform(1, 1, 5, 1);
  EnsembleField mean(spec);
  mean(0, 2, 0, 0) = 1.0;  // (0,0,1,0,0)
  const double lambda = 0.5;
  const EnsembleField out = smooth_mean(mean, lambda);

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 5);
  for (int q = 0; q < 3; ++q) {
    D(q, q) = 1.0;
    D(q, q + 1) = -2.0;
    D(q, q + 2) = 1.0;
  }
  const Eigen::MatrixXd A =
      lambda * Eigen::MatrixXd::Identity(5, 5) + (1.0 - lambda) * D.transpose() * D;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(5);
  rhs[2] = lambda;
  const Eigen::VectorXd expected = A.fullPivLu().solve(rhs);
  for (Eigen::Index k = 0; k < 5; ++k)
    CHECK(std::abs(out(0, k, 0, 0) - expected[k]) <= 1e-10);
}

TEST_CASE("smooth_mean is linear in its input") {
  const GridSpec spec = GridSpec::uniform(2, 3, 24, 1);
  const EnsembleField x = random_field(spec, 7);
  const EnsembleField y = random_field(spec, 8);
  EnsembleField combo(spec);
  combo.values() = 2.5 * x.values() - 1.25 * y.values();
  const EnsembleField lhs = smooth_mean(combo, 0.7);
  const EnsembleField sx = smooth_mean(x, 0.7);
  const EnsembleField sy = smooth_mean(y, 0.7);
  const Eigen::ArrayXd rhs = 2.5 * sx.values() - 1.25 * sy.values();
  CHECK((lhs.values() - rhs).abs().maxCoeff() <= 1e-9);
}

TEST_CASE("smooth_mean never increases the roughness penalty") {
  const GridSpec spec = GridSpec::uniform(2, 3, 40, 1);
  const EnsembleField x = random_field(spec, 9);
  const auto roughness = [&](const EnsembleField& f) {
    double acc = 0.0;
    for (Eigen::Index m = 0; m < spec.n_lat; ++m)
      for (Eigen::Index n = 0; n < spec.n_lon; ++n)
        for (Eigen::Index k = 1; k + 1 < spec.n_time; ++k) {
          const double d2 = f(0, k - 1, m, n) - 2.0 * f(0, k, m, n) + f(0, k + 1, m, n);
          acc += d2 * d2;
        }
    return acc;
  };
  for (double lambda : {0.99, 0.5, 0.05}) {
    const EnsembleField out = smooth_mean(x, lambda);
    CHECK(roughness(out) <= roughness(x) + 1e-12);
  }
}

TEST_CASE("smooth_mean rejects bad lambda") {
  const EnsembleField mean = random_field(GridSpec::uniform(1, 1, 8, 1), 10);
  CHECK_THROWS_AS(smooth_mean(mean, 0.0), config_error);
  CHECK_THROWS_AS(smooth_mean(mean, -0.5), config_error);
  CHECK_THROWS_AS(smooth_mean(mean, 1.5), config_error);
}

TEST_CASE("GeoMask altitude derivation and invariants") {
  Eigen::MatrixXd alt(2, 3);
  alt << -12.0, 0.0, 999.0, 1000.0, 1000.5, 2400.0;
  const GeoMask mask = GeoMask::from_altitude(alt);
  CHECK(mask.cls(0, 0) == SurfaceClass::ocean);
  CHECK(mask.cls(0, 1) == SurfaceClass::ocean);  // altitude 0 is not land
  CHECK(mask.cls(0, 2) == SurfaceClass::land);
  CHECK(mask.cls(1, 0) == SurfaceClass::land);   // threshold is strict
  CHECK(mask.cls(1, 1) == SurfaceClass::high_mountain);
  CHECK(mask.cls(1, 2) == SurfaceClass::high_mountain);
  CHECK_NOTHROW(mask.validate());

  GeoMask bad(1, 1);
  CHECK_THROWS_AS(bad.set(0, 0, SurfaceClass::high_mountain, 900.0), data_error);
}
