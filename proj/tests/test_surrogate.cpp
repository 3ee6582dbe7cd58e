#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "support/moments.hpp"
#include "swg/errors.hpp"
#include "swg/stats.hpp"
#include "swg/surrogate.hpp"

using namespace swg;

namespace {

// Identity transform, white noise in time, unit stationary ocean spectrum,
// independent bands: every output deviation is standard normal.
TruthConfig degenerate_config() {
  TruthConfig config;
  config.n_lat = 2;
  config.n_lon = 8;
  config.n_time = 250;
  config.n_real = 20;
  config.seed = 99;
  config.mean_level = 0.0;
  config.mean_seasonal = 0.0;
  config.mean_trend = 0.0;
  config.land_fraction = 0.0;
  config.g_min = 0.0;
  config.g_max = 0.0;
  config.h = 0.0;
  config.phi1 = 0.0;
  config.lat_a = 0.0;
  config.lat_b = 0.0;
  config.lat_zeta = 0.0;
  return config;
}

}  // namespace

TEST_CASE("generate is deterministic in the seed") {
  TruthConfig config;
  config.n_lat = 3;
  config.n_lon = 12;
  config.n_time = 40;
  config.n_real = 2;
  config.seed = 7;
  const ModelBundle bundle = build_truth_bundle(config);
  const EnsembleField a = generate(bundle, 2);
  const EnsembleField b = generate(bundle, 2, /*workers=*/2);
  CHECK((a.values() == b.values()).all());

  ModelBundle reseeded = bundle;
  reseeded.rng_seed = 8;
  const EnsembleField c = generate(reseeded, 2);
  CHECK((a.values() != c.values()).any());
}

TEST_CASE("generate rejects inconsistent bundles") {
  TruthConfig config;
  const ModelBundle bundle = build_truth_bundle(config);
  ModelBundle broken = bundle;
  broken.sites.pop_back();
  CHECK_THROWS_AS(generate(broken, 1), data_error);
  ModelBundle bad_band = bundle;
  bad_band.bands[0].beta_variance[2] = -1.0;
  CHECK_THROWS_AS(generate(bad_band, 1), config_error);
  CHECK_THROWS_AS(generate(bundle, 0), config_error);
}

TEST_CASE("degenerate bundle produces standard normal site samples") {
  const TruthConfig config = degenerate_config();
  const SyntheticTruth truth = generate_synthetic_truth(config);
  const EnsembleField dev = deviations(truth.field, truth.bundle.smoothed_mean);
  const GridSpec& spec = dev.spec();
  REQUIRE(spec.n_real * spec.n_time >= 5000);
  for (Eigen::Index m = 0; m < spec.n_lat; ++m) {
    for (Eigen::Index n = 0; n < spec.n_lon; n += 3) {
      std::vector<double> draws;
      for (Eigen::Index r = 0; r < spec.n_real; ++r)
        for (Eigen::Index k = 0; k < spec.n_time; ++k)
          draws.push_back(dev(r, k, m, n));
      const Eigen::Map<const Eigen::VectorXd> x(draws.data(),
                                                Eigen::Index(draws.size()));
      const double count = double(draws.size());
      const SampleMoments moments = sample_moments(x);
      CHECK(std::abs(moments.mean) < 3.5 / std::sqrt(count));
      CHECK(std::abs(moments.variance - 1.0) < 3.5 * std::sqrt(2.0 / count));
    }
  }
}

TEST_CASE("surrogate mean tracks the smoothed mean") {
  TruthConfig config;
  config.n_lat = 3;
  config.n_lon = 10;
  config.n_time = 60;
  config.seed = 4;
  const ModelBundle bundle = build_truth_bundle(config);
  const Eigen::Index n_runs = 60;
  const EnsembleField runs = generate(bundle, n_runs);
  const Eigen::MatrixXd site_sd = testsupport::latent_site_sd(bundle);

  Eigen::Index violations = 0, cells = 0;
  for (Eigen::Index k = 0; k < config.n_time; ++k) {
    for (Eigen::Index m = 0; m < config.n_lat; ++m) {
      for (Eigen::Index n = 0; n < config.n_lon; ++n) {
        double acc = 0.0;
        for (Eigen::Index r = 0; r < n_runs; ++r) acc += runs(r, k, m, n);
        const double mean = acc / double(n_runs);
        const SiteParams& site = bundle.site(m, n);
        const double s = site_sd(m, n);
        const auto pop = testsupport::tgh_population_moments(
            site.tukey.g * s, site.tukey.h * s * s);
        const double deviation_mean = site.tukey.xi + site.tukey.omega * pop.mean;
        const double deviation_sd = site.tukey.omega * pop.sd;
        const double center = bundle.smoothed_mean(0, k, m, n) + deviation_mean;
        ++cells;
        if (std::abs(mean - center) > 3.0 * deviation_sd / std::sqrt(double(n_runs)))
          ++violations;
      }
    }
  }
  // 3-sigma bands cover ~99.7% per cell; allow the expected handful
  CHECK(double(violations) <= std::max(5.0, 0.01 * double(cells)));
}

TEST_CASE("site skewness follows the sign of g") {
  TruthConfig config;
  config.n_lat = 2;
  config.n_lon = 12;
  config.n_time = 160;
  config.n_real = 3;
  config.g_min = 0.8;
  config.g_max = 0.8;
  config.h = 0.05;
  config.seed = 12;
  const SyntheticTruth truth = generate_synthetic_truth(config);
  const EnsembleField dev = deviations(truth.field, truth.bundle.smoothed_mean);

  Eigen::Index positive = 0, total = 0;
  for (Eigen::Index m = 0; m < config.n_lat; ++m) {
    for (Eigen::Index n = 0; n < config.n_lon; ++n) {
      std::vector<double> draws;
      for (Eigen::Index r = 0; r < config.n_real; ++r)
        for (Eigen::Index k = 0; k < config.n_time; ++k)
          draws.push_back(dev(r, k, m, n));
      const Eigen::Map<const Eigen::VectorXd> x(draws.data(),
                                                Eigen::Index(draws.size()));
      ++total;
      if (sample_moments(x).skewness > 0.0) ++positive;
    }
  }
  CHECK(double(positive) >= 0.95 * double(total));
}

TEST_CASE("truth factory validation") {
  TruthConfig config;
  config.ocean_variance = 0.0;  // collapses the whole spectrum
  CHECK_THROWS_AS(build_truth_bundle(config), config_error);
  config = TruthConfig{};
  config.h = 0.9;
  CHECK_THROWS_AS(build_truth_bundle(config), config_error);
  config = TruthConfig{};
  config.n_time = 0;
  CHECK_THROWS_AS(build_truth_bundle(config), config_error);
}

TEST_CASE("truth factory smoke: tiny config satisfies every invariant") {
  TruthConfig config;  // defaults: M=4, N=16, K=120, R=3
  const SyntheticTruth truth = generate_synthetic_truth(config);
  CHECK_NOTHROW(truth.bundle.validate());
  CHECK_NOTHROW(truth.field.validate_finite());
  CHECK(truth.field.spec().n_real == 3);
  CHECK(truth.field.spec().n_time == 120);

  // the mask has all three surface classes under the default profile
  bool has_ocean = false, has_land = false, has_mountain = false;
  for (Eigen::Index m = 0; m < config.n_lat; ++m)
    for (Eigen::Index n = 0; n < config.n_lon; ++n) {
      const SurfaceClass c = truth.bundle.mask.cls(m, n);
      has_ocean |= c == SurfaceClass::ocean;
      has_land |= c == SurfaceClass::land;
      has_mountain |= c == SurfaceClass::high_mountain;
    }
  CHECK(has_ocean);
  CHECK(has_land);
  CHECK(has_mountain);
}

TEST_CASE("latent variance oracle matches a directly measurable case") {
  // identity transform so the output deviations ARE the latent process;
  // non-trivial band coupling exercises the covariance propagation
  TruthConfig config = degenerate_config();
  config.n_lat = 4;
  config.n_time = 400;
  config.n_real = 25;
  config.lat_a = 0.3;
  config.lat_b = -0.2;
  config.lat_zeta = 0.7;
  config.lat_eta = 0.6;
  config.phi1 = 0.4;
  config.seed = 31;
  const SyntheticTruth truth = generate_synthetic_truth(config);
  const Eigen::MatrixXd predicted = testsupport::latent_site_sd(truth.bundle);

  for (Eigen::Index m = 0; m < config.n_lat; ++m) {
    for (Eigen::Index n = 0; n < config.n_lon; n += 2) {
      double acc = 0.0;
      Eigen::Index count = 0;
      for (Eigen::Index r = 0; r < config.n_real; ++r)
        for (Eigen::Index k = 0; k < config.n_time; ++k) {
          const double d =
              truth.field(r, k, m, n) - truth.bundle.smoothed_mean(0, k, m, n);
          acc += d * d;
          ++count;
        }
      const double sample_sd = std::sqrt(acc / double(count));
      // AR dependence inflates the SD of a variance estimate; stay generous
      CHECK(sample_sd == doctest::Approx(predicted(m, n)).epsilon(0.08));
    }
  }
}

TEST_CASE("simulate_innovation_field produces unit-scale slices") {
  TruthConfig config = degenerate_config();
  config.n_lat = 3;
  const ModelBundle bundle = build_truth_bundle(config);
  const EnsembleField slices = simulate_innovation_field(bundle, 3000, 5);
  for (Eigen::Index m = 0; m < 3; ++m) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < 3000; ++k) acc += slices(0, k, m, 2) * slices(0, k, m, 2);
    const double var = acc / 3000.0;
    CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / 3000.0));
  }
}
