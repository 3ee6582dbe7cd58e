#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "swg/grid.hpp"
#include "swg/latvar.hpp"
#include "swg/spectrum.hpp"
#include "swg/temporal.hpp"
#include "swg/tukey.hpp"

namespace swg {

struct SiteParams {
  TukeySiteParams tukey;
  TemporalSiteParams temporal;
};

// Everything needed to generate surrogate runs: grid geometry, surface mask,
// smoothed mean, per-site transform/AR tables, per-band spectra, band-to-band
// coupling, and the stream seed.
struct ModelBundle {
  GridSpec grid;
  GeoMask mask;
  SmoothedMean smoothed_mean;                // n_real == 1
  std::vector<SiteParams> sites;             // index m * n_lon + n
  std::vector<BandSpectrumParams> bands;     // one per latitude band
  std::vector<LatVarParams> lat_coupling;    // size n_lat - 1; [m-1]: band m-1 -> m
  std::uint64_t rng_seed = 0;

  const SiteParams& site(Eigen::Index m, Eigen::Index n) const {
    return sites[static_cast<std::size_t>(m * grid.n_lon + n)];
  }
  void validate() const;
};

// Generates n_runs surrogate realizations. Deterministic in
// (bundle, n_runs, rng_seed); runs use disjoint counter streams so the result
// does not depend on worker scheduling.
EnsembleField generate(const ModelBundle& bundle, Eigen::Index n_runs,
                       int workers = 0);

// Spatial innovation fields alone (no AR recursion, no transform, no mean):
// n_slices independent time slices of the band-coupled spectral field, as an
// EnsembleField with one realization. Used for model-implied diagnostics.
EnsembleField simulate_innovation_field(const ModelBundle& bundle,
                                        Eigen::Index n_slices, std::uint64_t seed);

// Ground-truth factory for recovery tests: a synthetic ensemble plus the
// exact bundle that generated it.
struct TruthConfig {
  Eigen::Index n_lat = 4;
  Eigen::Index n_lon = 16;
  Eigen::Index n_time = 120;
  Eigen::Index n_real = 3;
  std::uint64_t seed = 1;

  // smoothed mean: level + seasonal cycle + linear trend
  double mean_level = 8.0;
  double mean_seasonal = 1.5;
  double mean_trend = 2e-4;

  // mask: one land block per band with a triangular altitude profile; cells
  // above 1000 m become high mountains, the rest of the band is ocean
  double land_fraction = 0.375;
  double peak_altitude_m = 1600.0;

  // transform: g ramps linearly across longitude, h constant
  double xi = 0.0;
  double omega = 1.0;
  double g_min = 0.2;
  double g_max = 0.6;
  double h = 0.1;

  // temporal AR(1); the latent process is standardized by default, matching
  // the fitted family
  double phi1 = 0.5;
  bool standardize_latent = true;
  double innovation_sd = 1.0;  // used when standardize_latent is false

  // evolutionary spectrum, constant across bands
  double ocean_variance = 1.0;
  double ocean_inverse_range = 0.5;
  double ocean_smoothness = 1.0;
  double land_factor = 1.4;
  double mountain_factor = 0.7;
  double gamma_variance = 3e-4;
  double gamma_inverse_range = -1e-4;
  double gamma_smoothness = 0.0;
  int taper_dilate = 1;
  double taper_halfwidth = 2.0;
  bool unit_ocean_variance = true;  // scale betas so the ocean site variance is 1

  // latitudinal coupling, constant across band pairs
  double lat_a = 0.15;
  double lat_b = -0.1;
  double lat_zeta = 0.6;
  double lat_eta = 0.5;
};

struct SyntheticTruth {
  EnsembleField field;
  ModelBundle bundle;
};

SyntheticTruth generate_synthetic_truth(const TruthConfig& config, int workers = 0);
ModelBundle build_truth_bundle(const TruthConfig& config);

}  // namespace swg
