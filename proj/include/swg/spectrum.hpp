#pragma once

#include <Eigen/Core>
#include <array>
#include <complex>

#include "swg/errors.hpp"
#include "swg/grid.hpp"

namespace swg {

// Matern-like spectral density on the circle of N points:
//   |f(c)|^2 = variance * (inverse_range^2 + 4 sin^2(c pi / N))^(-smoothness - 1/2)
struct MaternSpectrumParams {
  double variance = 1.0;       // psi
  double inverse_range = 1.0;  // alpha
  double smoothness = 0.5;     // nu

  void validate() const {
    if (!(variance > 0.0) || !(inverse_range > 0.0) || !(smoothness > 0.0))
      throw config_error("MaternSpectrumParams: all parameters must be positive");
  }
};

double matern_spectrum(Eigen::Index c, const MaternSpectrumParams& params,
                       Eigen::Index n_lon);

// beta * exp(arctan(altitude * gamma)); bounded in [beta e^{-pi/2}, beta e^{pi/2}].
double altitude_link(double beta, double gamma, double altitude_m);

// Per-band evolutionary spectrum parameters: one Matern triple per surface
// class (index 0 mountain, 1 land, 2 ocean), altitude modulation gamma shared
// by the mountain and land classes, and the land-taper shape.
struct BandSpectrumParams {
  Eigen::Vector3d beta_variance{1.0, 1.0, 1.0};
  Eigen::Vector3d beta_inverse_range{1.0, 1.0, 1.0};
  Eigen::Vector3d beta_smoothness{0.5, 0.5, 0.5};
  double gamma_variance = 0.0;
  double gamma_inverse_range = 0.0;
  double gamma_smoothness = 0.0;
  int taper_dilate = 0;          // g': whole-cell dilation of the land indicator
  double taper_halfwidth = 1.0;  // r': triangular kernel half-width in cells

  void validate() const;
};

enum class SpectrumModel { full, no_altitude };  // FULL / LAO

// Site-level Matern parameters implied by the band parameters, the surface
// class, and the altitude.
MaternSpectrumParams site_matern_params(const BandSpectrumParams& params,
                                        SurfaceClass cls, double altitude_m);

// Smooth land weight b in [0,1] for one band: the land/mountain indicator,
// dilated by taper_dilate cells, convolved circularly with a normalized
// triangular kernel of half-width taper_halfwidth.
Eigen::VectorXd land_taper(const GeoMask& mask, Eigen::Index band, int taper_dilate,
                           double taper_halfwidth);

// Real non-negative amplitude table: rows are sites along the band, columns
// wavenumbers c = 0..N-1.
struct EvolutionarySpectrum {
  Eigen::MatrixXd amplitude;
  Eigen::Index n_lon() const { return amplitude.rows(); }
};

EvolutionarySpectrum build_spectrum(const BandSpectrumParams& params,
                                    const GeoMask& mask, Eigen::Index band);

// H(n) = sum_c amplitude(n,c) exp(i 2 pi n c / N) coeffs(c). The coefficient
// vector must be Hermitian-symmetric so the output is real.
Eigen::VectorXd synthesize_band(const EvolutionarySpectrum& spectrum,
                                const Eigen::VectorXcd& coeffs);

// Real synthesis operator B with H = B u, u the Hermitian-packed real
// coefficient vector (see latvar.hpp for the packing).
Eigen::MatrixXd synthesis_matrix(const EvolutionarySpectrum& spectrum);

// Implied covariance Re(A A^H) with A(n,c) = amplitude(n,c) e^{i 2 pi n c/N};
// symmetric PSD, circulant for a longitude-constant spectrum.
Eigen::MatrixXd band_covariance(const EvolutionarySpectrum& spectrum);

struct BandFitOptions {
  int max_evals = 2000;
  double rel_ftol = 1e-9;
  int taper_dilate_max = 2;  // outer search range for g'
};

struct BandFitResult {
  BandSpectrumParams params;
  double loglik = 0.0;
  SpectrumModel model = SpectrumModel::full;
  Eigen::Index n_replicates = 0;
};

// Gaussian likelihood fit of the band parameters; rows of `replicates` are
// independent longitude series (pooled over time and realizations). The full
// model is started from the fitted no-altitude model as well, so its
// log-likelihood can never fall below it.
BandFitResult fit_band(const Eigen::MatrixXd& replicates, const GeoMask& mask,
                       Eigen::Index band, SpectrumModel model,
                       const BandFitOptions& options = {});

}  // namespace swg
