#include "swg/surrogate.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <vector>

#include "swg/parallel.hpp"
#include "swg/rng.hpp"

namespace swg {

namespace {

constexpr int kBurnInSteps = 200;
constexpr std::uint64_t kTagInnovation = 1;
constexpr std::uint64_t kTagArInit = 2;

// Precomputed per-band operators shared across runs.
struct SpatialModel {
  std::vector<Eigen::MatrixXd> synthesis;      // B per band
  std::vector<Eigen::VectorXd> innovation_sd;  // per band >= 1
  const ModelBundle* bundle = nullptr;

  explicit SpatialModel(const ModelBundle& b) : bundle(&b) {
    const Eigen::Index n_lat = b.grid.n_lat;
    synthesis.reserve(static_cast<std::size_t>(n_lat));
    for (Eigen::Index m = 0; m < n_lat; ++m)
      synthesis.push_back(synthesis_matrix(
          build_spectrum(b.bands[static_cast<std::size_t>(m)], b.mask, m)));
    for (Eigen::Index m = 1; m < n_lat; ++m)
      innovation_sd.push_back(
          innovation_variances(b.lat_coupling[static_cast<std::size_t>(m - 1)],
                               b.grid.n_lon)
              .cwiseSqrt());
  }

  // One spatial slice: the band-coupled innovation field H(m, n) at a fixed
  // (run, time) pair, keyed so any worker order reproduces the same bytes.
  Eigen::MatrixXd slice(std::uint64_t seed, std::uint64_t run,
                        std::uint64_t time) const {
    const Eigen::Index n_lat = bundle->grid.n_lat;
    const Eigen::Index n_lon = bundle->grid.n_lon;
    Eigen::MatrixXd field(n_lat, n_lon);
    Eigen::VectorXd packed;
    for (Eigen::Index m = 0; m < n_lat; ++m) {
      CounterRng rng(seed, kTagInnovation, run, static_cast<std::uint64_t>(m), time);
      if (m == 0) {
        packed = rng.normals(n_lon);  // stationary unit-variance start
      } else {
        const Eigen::VectorXd innovation =
            innovation_sd[static_cast<std::size_t>(m - 1)].cwiseProduct(
                rng.normals(n_lon));
        packed = propagate(packed,
                           bundle->lat_coupling[static_cast<std::size_t>(m - 1)],
                           innovation);
      }
      field.row(m) =
          (synthesis[static_cast<std::size_t>(m)] * packed).transpose();
    }
    return field;
  }
};

}  // namespace

void ModelBundle::validate() const {
  grid.validate();
  mask.validate();
  if (mask.n_lat() != grid.n_lat || mask.n_lon() != grid.n_lon)
    throw data_error("ModelBundle: mask does not match the grid");
  if (smoothed_mean.spec().n_real != 1 ||
      !smoothed_mean.spec().same_geometry(grid))
    throw data_error("ModelBundle: smoothed mean does not match the grid");
  smoothed_mean.validate_finite();
  if (static_cast<Eigen::Index>(sites.size()) != grid.n_lat * grid.n_lon)
    throw data_error("ModelBundle: site table size mismatch");
  if (static_cast<Eigen::Index>(bands.size()) != grid.n_lat)
    throw data_error("ModelBundle: band table size mismatch");
  if (static_cast<Eigen::Index>(lat_coupling.size()) != grid.n_lat - 1)
    throw data_error("ModelBundle: coupling table size mismatch");
  for (const SiteParams& site : sites) {
    site.tukey.validate();
    site.temporal.validate();
  }
  for (const BandSpectrumParams& band : bands) band.validate();
  for (const LatVarParams& coupling : lat_coupling) coupling.validate();
}

EnsembleField generate(const ModelBundle& bundle, Eigen::Index n_runs,
                       int workers) {
  bundle.validate();
  if (n_runs < 1) throw config_error("generate: n_runs must be >= 1");

  const Eigen::Index n_lat = bundle.grid.n_lat;
  const Eigen::Index n_lon = bundle.grid.n_lon;
  const Eigen::Index n_time = bundle.grid.n_time;
  const Eigen::Index n_sites = n_lat * n_lon;

  const SpatialModel spatial(bundle);

  // stationary lag-state factor per site (AR order can vary site to site)
  int max_p = 0;
  for (const SiteParams& site : bundle.sites)
    max_p = std::max(max_p, site.temporal.p);
  std::vector<Eigen::MatrixXd> init_factor(static_cast<std::size_t>(n_sites));
  for (Eigen::Index s = 0; s < n_sites; ++s) {
    const TemporalSiteParams& t = bundle.sites[static_cast<std::size_t>(s)].temporal;
    if (t.p == 0) continue;
    const Eigen::VectorXd gamma =
        ar_stationary_autocov(t.phi, t.innovation_sd, t.p - 1);
    Eigen::MatrixXd cov(t.p, t.p);
    for (int i = 0; i < t.p; ++i)
      for (int j = 0; j < t.p; ++j) cov(i, j) = gamma[std::abs(i - j)];
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw numeric_error("generate: stationary covariance not PD at a site");
    init_factor[static_cast<std::size_t>(s)] = llt.matrixL();
  }

  GridSpec out_spec = bundle.grid;
  out_spec.n_real = n_runs;
  EnsembleField out(out_spec);

  parallel_for(n_runs, workers, [&](std::int64_t run) {
    // exact stationary start for the latent AR state, then a burn-in margin
    Eigen::MatrixXd lag_state(std::max(max_p, 1), n_sites);
    lag_state.setZero();
    for (Eigen::Index s = 0; s < n_sites; ++s) {
      const int p = bundle.sites[static_cast<std::size_t>(s)].temporal.p;
      if (p == 0) continue;
      CounterRng rng(bundle.rng_seed, kTagArInit, static_cast<std::uint64_t>(run),
                     static_cast<std::uint64_t>(s));
      lag_state.col(s).head(p) =
          init_factor[static_cast<std::size_t>(s)] * rng.normals(p);
    }

    for (Eigen::Index step = 0; step < n_time + kBurnInSteps; ++step) {
      const Eigen::MatrixXd innovation_field =
          spatial.slice(bundle.rng_seed, static_cast<std::uint64_t>(run),
                        static_cast<std::uint64_t>(step));
      const Eigen::Index k_out = step - kBurnInSteps;
      for (Eigen::Index m = 0; m < n_lat; ++m) {
        for (Eigen::Index n = 0; n < n_lon; ++n) {
          const Eigen::Index s = m * n_lon + n;
          const SiteParams& site = bundle.sites[static_cast<std::size_t>(s)];
          const int p = site.temporal.p;
          double value = site.temporal.innovation_sd * innovation_field(m, n);
          for (int j = 0; j < p; ++j)
            value += site.temporal.phi[j] * lag_state(j, s);
          for (int j = std::max(p, 1) - 1; j > 0; --j)
            lag_state(j, s) = lag_state(j - 1, s);
          lag_state(0, s) = value;
          if (k_out >= 0) {
            const double deviation =
                site.tukey.xi +
                site.tukey.omega *
                    tgh_transform(value, site.tukey.g, site.tukey.h);
            out(run, k_out, m, n) =
                bundle.smoothed_mean(0, k_out, m, n) + deviation;
          }
        }
      }
    }
  });

  out.validate_finite();
  return out;
}

EnsembleField simulate_innovation_field(const ModelBundle& bundle,
                                        Eigen::Index n_slices,
                                        std::uint64_t seed) {
  bundle.validate();
  if (n_slices < 1)
    throw config_error("simulate_innovation_field: n_slices must be >= 1");
  const SpatialModel spatial(bundle);

  GridSpec spec = bundle.grid;
  spec.n_real = 1;
  spec.n_time = n_slices;
  spec.time_labels.assign(static_cast<std::size_t>(n_slices), "");
  for (Eigen::Index k = 0; k < n_slices; ++k)
    spec.time_labels[static_cast<std::size_t>(k)] = "slice-" + std::to_string(k);

  EnsembleField out(spec);
  for (Eigen::Index k = 0; k < n_slices; ++k) {
    const Eigen::MatrixXd field =
        spatial.slice(seed, 0, static_cast<std::uint64_t>(k));
    for (Eigen::Index m = 0; m < spec.n_lat; ++m)
      for (Eigen::Index n = 0; n < spec.n_lon; ++n) out(0, k, m, n) = field(m, n);
  }
  return out;
}

ModelBundle build_truth_bundle(const TruthConfig& config) {
  if (config.n_lat < 1 || config.n_lon < 1 || config.n_time < 1 ||
      config.n_real < 1)
    throw config_error("TruthConfig: dimensions must be >= 1");
  if (!(config.land_fraction >= 0.0) || config.land_fraction > 1.0)
    throw config_error("TruthConfig: land_fraction must lie in [0, 1]");
  if (!(config.h >= 0.0) || config.h > kTukeyHMax)
    throw config_error("TruthConfig: h outside the supported range");
  if (!(std::abs(config.phi1) < 1.0))
    throw config_error("TruthConfig: phi1 must satisfy |phi1| < 1");

  ModelBundle bundle;
  bundle.grid = GridSpec::uniform(config.n_lat, config.n_lon, config.n_time,
                                  config.n_real);
  bundle.rng_seed = config.seed;

  // mask: one land block per band with a triangular altitude profile
  bundle.mask = GeoMask(config.n_lat, config.n_lon);
  const auto land_cells =
      static_cast<Eigen::Index>(std::llround(config.land_fraction * config.n_lon));
  const Eigen::Index land_begin = config.n_lon / 4;
  for (Eigen::Index m = 0; m < config.n_lat; ++m) {
    for (Eigen::Index j = 0; j < land_cells; ++j) {
      const Eigen::Index n = (land_begin + j) % config.n_lon;
      const double frac =
          land_cells > 1 ? double(j) / double(land_cells - 1) : 0.5;
      const double profile = 1.0 - std::abs(2.0 * frac - 1.0);  // triangle
      const double altitude = std::max(10.0, config.peak_altitude_m * profile);
      bundle.mask.set(m, n,
                      altitude > 1000.0 ? SurfaceClass::high_mountain
                                        : SurfaceClass::land,
                      altitude);
    }
  }

  // smoothed mean: level + seasonal cycle + trend, varying mildly with latitude
  {
    GridSpec mean_spec = bundle.grid;
    mean_spec.n_real = 1;
    SmoothedMean mean(mean_spec);
    for (Eigen::Index k = 0; k < config.n_time; ++k) {
      const double seasonal =
          config.mean_seasonal * std::sin(2.0 * M_PI * double(k % 12) / 12.0);
      for (Eigen::Index m = 0; m < config.n_lat; ++m) {
        const double lat_shift = 0.2 * double(m);
        for (Eigen::Index n = 0; n < config.n_lon; ++n)
          mean(0, k, m, n) = config.mean_level + lat_shift + seasonal +
                             config.mean_trend * double(k);
      }
    }
    bundle.smoothed_mean = mean;
  }

  // per-site transform and AR tables; g ramps across longitude
  bundle.sites.resize(static_cast<std::size_t>(config.n_lat * config.n_lon));
  for (Eigen::Index m = 0; m < config.n_lat; ++m) {
    for (Eigen::Index n = 0; n < config.n_lon; ++n) {
      SiteParams site;
      site.tukey.xi = config.xi;
      site.tukey.omega = config.omega;
      const double frac =
          config.n_lon > 1 ? double(n) / double(config.n_lon - 1) : 0.5;
      site.tukey.g = config.g_min + (config.g_max - config.g_min) * frac;
      site.tukey.h = config.h;
      site.temporal.p = config.phi1 == 0.0 ? 0 : 1;
      if (site.temporal.p == 1) {
        site.temporal.phi = Eigen::VectorXd::Constant(1, config.phi1);
        site.temporal.innovation_sd =
            config.standardize_latent
                ? std::sqrt(1.0 - config.phi1 * config.phi1)
                : config.innovation_sd;
      } else {
        site.temporal.innovation_sd =
            config.standardize_latent ? 1.0 : config.innovation_sd;
      }
      bundle.sites[static_cast<std::size_t>(m * config.n_lon + n)] = site;
    }
  }

  // spectrum: constant across bands; optionally normalized so the ocean site
  // variance sum_c |f(c)|^2 equals one
  BandSpectrumParams band;
  double psi_ocean = config.ocean_variance;
  if (config.unit_ocean_variance) {
    MaternSpectrumParams unit;
    unit.variance = 1.0;
    unit.inverse_range = config.ocean_inverse_range;
    unit.smoothness = config.ocean_smoothness;
    double total = 0.0;
    for (Eigen::Index c = 0; c < config.n_lon; ++c)
      total += matern_spectrum(c, unit, config.n_lon);
    psi_ocean = config.ocean_variance / total;
  }
  band.beta_variance << config.mountain_factor * psi_ocean,
      config.land_factor * psi_ocean, psi_ocean;
  band.beta_inverse_range.setConstant(config.ocean_inverse_range);
  band.beta_smoothness.setConstant(config.ocean_smoothness);
  band.gamma_variance = config.gamma_variance;
  band.gamma_inverse_range = config.gamma_inverse_range;
  band.gamma_smoothness = config.gamma_smoothness;
  band.taper_dilate = config.taper_dilate;
  band.taper_halfwidth = config.taper_halfwidth;
  band.validate();
  bundle.bands.assign(static_cast<std::size_t>(config.n_lat), band);

  LatVarParams coupling;
  coupling.a = config.lat_a;
  coupling.b = config.lat_b;
  coupling.zeta = config.lat_zeta;
  coupling.eta = config.lat_eta;
  coupling.validate();
  bundle.lat_coupling.assign(
      static_cast<std::size_t>(std::max<Eigen::Index>(config.n_lat - 1, 0)),
      coupling);

  bundle.validate();
  return bundle;
}

SyntheticTruth generate_synthetic_truth(const TruthConfig& config, int workers) {
  SyntheticTruth truth;
  truth.bundle = build_truth_bundle(config);
  truth.field = generate(truth.bundle, config.n_real, workers);
  return truth;
}

}  // namespace swg
