#pragma once

#include <Eigen/Core>

#include "swg/errors.hpp"
#include "swg/rng.hpp"
#include "swg/tukey.hpp"

namespace swg {

// Per-site autoregressive structure of the latent Gaussian process: order p,
// coefficients phi^1..phi^p, innovation standard deviation.
struct TemporalSiteParams {
  int p = 0;
  Eigen::VectorXd phi;       // length p
  double innovation_sd = 1.0;

  bool is_stationary() const;
  void validate() const;
};

struct SiteFitResult {
  TukeySiteParams tukey;
  TemporalSiteParams temporal;
  double loglik = 0.0;
  double bic = 0.0;
  Eigen::Index n_obs = 0;  // conditional observations entering the likelihood
  int n_params = 0;        // 4 + p + 1 for the transformed family, p + 1 Gaussian
};

struct SiteFitOptions {
  double h_max = kTukeyHMax;
  int max_evals = 2000;
  double rel_ftol = 1e-9;
  double inverse_tol = 1e-11;
  int polish_passes = 2;
};

// Fits location/scale/skew/tail plus a stationary AR(p) to the series at one
// site by maximizing the conditional likelihood (conditioning on the first p
// latent values). Rows of `series` are realizations, columns time steps.
SiteFitResult fit_site(const Eigen::MatrixXd& series, int p,
                       const SiteFitOptions& options = {});

// Gaussian baseline: xi=0, omega=1, g=h=0 pinned, only the AR structure and
// innovation scale are free.
SiteFitResult fit_site_gaussian(const Eigen::MatrixXd& series, int p,
                                const SiteFitOptions& options = {});

// BIC order selection over p in {0..p_max}; all candidate orders are scored
// on the common sample conditioned on the first p_max values so their BICs
// are comparable. Ties break toward the smaller order.
int select_order(const Eigen::MatrixXd& series, int p_max,
                 const SiteFitOptions& options = {});

// Standardized one-step-ahead residuals under the fitted parameters; one row
// per realization, each of length K - p.
Eigen::MatrixXd site_residuals(const Eigen::MatrixXd& series, const SiteFitResult& fit,
                               double inverse_tol = 1e-11);

// BIC(Gaussian baseline) - BIC(transformed model), both selected over
// p in {0..p_max} on the common conditional sample. Positive values favor the
// transformed model.
double bic_delta_gaussian(const Eigen::MatrixXd& series, int p_max,
                          const SiteFitOptions& options = {});

// Stationary autocovariances gamma(0..n_lags) of an AR(p) with unit-variance
// innovations scaled by innovation_sd.
Eigen::VectorXd ar_stationary_autocov(const Eigen::VectorXd& phi,
                                      double innovation_sd, int n_lags);

// Simulates one site of the transformed autoregressive process: latent AR(p)
// started from its exact stationary law, pushed through the transform. Rows
// are realizations.
Eigen::MatrixXd simulate_site(const TukeySiteParams& tukey,
                              const TemporalSiteParams& temporal,
                              Eigen::Index n_time, Eigen::Index n_real,
                              CounterRng& rng);

namespace detail {

// Map partial autocorrelations (all in (-1,1)) to stationary AR coefficients
// via the Levinson-Durbin recursion, and back.
Eigen::VectorXd pacf_to_ar(const Eigen::VectorXd& pacf);
Eigen::VectorXd ar_to_pacf(const Eigen::VectorXd& phi);

}  // namespace detail

}  // namespace swg
