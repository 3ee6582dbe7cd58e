#pragma once

// Closed-form moments of the transformed-normal family and an exact latent
// variance propagation for the band-coupled spectral model. Test-side oracles
// for the generation path.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "swg/latvar.hpp"
#include "swg/spectrum.hpp"
#include "swg/surrogate.hpp"
#include "swg/temporal.hpp"

namespace testsupport {

// E[exp(a Z + b Z^2)] = exp(a^2 / (2(1-2b))) / sqrt(1-2b) for b < 1/2.
inline double gaussian_exp_moment(double a, double b) {
  if (!(b < 0.5)) throw std::domain_error("gaussian_exp_moment: b >= 1/2");
  const double denom = 1.0 - 2.0 * b;
  return std::exp(a * a / (2.0 * denom)) / std::sqrt(denom);
}

// Raw moment E[tau_{g,h}(Z)^k]; finite only for h < 1/k.
inline double tgh_raw_moment(int k, double g, double h) {
  if (!(h * k < 1.0))
    throw std::domain_error("tgh_raw_moment: moment does not exist");
  if (std::abs(g) < 1e-12) {
    if (k % 2 == 1) return 0.0;
    // E[Z^{2m} exp(k h Z^2 / 2)] = (2m-1)!! / (1-kh)^{m+1/2}
    const int m = k / 2;
    double dfact = 1.0;
    for (int i = 2 * m - 1; i >= 1; i -= 2) dfact *= double(i);
    return dfact / std::pow(1.0 - double(k) * h, double(m) + 0.5);
  }
  // binomial expansion of ((e^{gZ} - 1)/g)^k e^{k h Z^2 / 2}
  double total = 0.0;
  double binom = 1.0;
  for (int j = 0; j <= k; ++j) {
    const double sign = ((k - j) % 2 == 0) ? 1.0 : -1.0;
    total += sign * binom * gaussian_exp_moment(double(j) * g, double(k) * h / 2.0);
    binom *= double(k - j) / double(j + 1);
  }
  return total / std::pow(g, k);
}

struct TghPopulationMoments {
  double mean;
  double sd;
  double skewness;
  double excess_kurtosis;
};

inline TghPopulationMoments tgh_population_moments(double g, double h) {
  const double m1 = tgh_raw_moment(1, g, h);
  const double m2 = tgh_raw_moment(2, g, h);
  const double m3 = tgh_raw_moment(3, g, h);
  const double m4 = tgh_raw_moment(4, g, h);
  const double var = m2 - m1 * m1;
  const double mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1 * m1 * m1;
  const double mu4 =
      m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1 * m1 * m1 * m1;
  TghPopulationMoments out;
  out.mean = m1;
  out.sd = std::sqrt(var);
  out.skewness = mu3 / std::pow(var, 1.5);
  out.excess_kurtosis = mu4 / (var * var) - 3.0;
  return out;
}

// Moment dilution of centering R iid draws on their own mean: for
// D_r = Y_r - mean(Y), skewness scales by (R-2)/sqrt(R(R-1)) and excess
// kurtosis by sum(a^4)/(sum(a^2))^2 with a = ((R-1)/R, -1/R, ..., -1/R).
// Fits on ensemble deviations target this demeaned law, so closure
// comparisons must dilute the raw population moments accordingly.
struct DemeanedMomentFactors {
  double skewness;
  double excess_kurtosis;
};

inline DemeanedMomentFactors demeaned_moment_factors(Eigen::Index n_real) {
  const double r = double(n_real);
  DemeanedMomentFactors f;
  if (n_real < 2) {
    f.skewness = 1.0;
    f.excess_kurtosis = 1.0;
    return f;
  }
  f.skewness = (r - 2.0) / std::sqrt(r * (r - 1.0));
  const double sum_a2 = 1.0 - 1.0 / r;
  const double sum_a4 =
      std::pow((r - 1.0) / r, 4.0) + (r - 1.0) * std::pow(1.0 / r, 4.0);
  f.excess_kurtosis = sum_a4 / (sum_a2 * sum_a2);
  return f;
}

// Exact marginal SD of the latent AR input at every site of a bundle:
// packed-coefficient covariance propagated across bands
// (V_1 = I, V_m = P V P^T + D), pushed through the synthesis operator, and
// scaled by the site AR gain.
inline Eigen::MatrixXd latent_site_sd(const swg::ModelBundle& bundle) {
  const Eigen::Index n_lat = bundle.grid.n_lat;
  const Eigen::Index n_lon = bundle.grid.n_lon;
  Eigen::MatrixXd out(n_lat, n_lon);
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n_lon, n_lon);
  for (Eigen::Index m = 0; m < n_lat; ++m) {
    if (m > 0) {
      const swg::LatVarParams& c = bundle.lat_coupling[std::size_t(m - 1)];
      const Eigen::MatrixXd p = swg::build_transition(c, n_lon);
      const Eigen::VectorXd d = swg::innovation_variances(c, n_lon);
      v = (p * v * p.transpose()).eval();
      v.diagonal() += d;
    }
    const Eigen::MatrixXd b = swg::synthesis_matrix(
        swg::build_spectrum(bundle.bands[std::size_t(m)], bundle.mask, m));
    const Eigen::VectorXd site_var = (b * v * b.transpose()).diagonal();
    for (Eigen::Index n = 0; n < n_lon; ++n) {
      const swg::TemporalSiteParams& t = bundle.site(m, n).temporal;
      const double gain =
          swg::ar_stationary_autocov(t.phi, 1.0, 0)[0];  // unit innovations
      out(m, n) = t.innovation_sd * std::sqrt(site_var[n] * gain);
    }
  }
  return out;
}

}  // namespace testsupport
