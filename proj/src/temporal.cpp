#include "swg/temporal.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "swg/optimize.hpp"
#include "swg/stats.hpp"

namespace swg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

// Vectorized bulk inversion of the transform: Newton iterations over the
// whole array with a step clamp, scalar bracketed fallback for stragglers.
// `z` carries the starting guesses and receives the solution.
bool tgh_inverse_bulk(const Eigen::ArrayXd& y, double g, double h, double tol,
                      Eigen::ArrayXd& z) {
  const Eigen::Index n = y.size();
  if (g == 0.0 && h == 0.0) {
    z = y;
    return true;
  }
  const bool small_g = std::abs(g) < kTukeySmallG;
  const double z_cap = h > 0.0 ? std::sqrt(1400.0 / h) : 1e8;
  z = z.min(z_cap).max(-z_cap);

  Eigen::ArrayXd f(n), deriv(n);
  for (int it = 0; it < 30; ++it) {
    const Eigen::ArrayXd tail = (0.5 * h * z.square()).exp();
    if (small_g) {
      f = z * (1.0 + 0.5 * g * z) * tail - y;
      deriv = tail * (1.0 + g * z + h * z.square() * (1.0 + 0.5 * g * z));
    } else {
      // expm1 keeps (e^{gz} - 1)/g exact for small g; the plain exp route
      // leaves cancellation noise right at the convergence tolerance
      const Eigen::ArrayXd em1 =
          (g * z).unaryExpr([](double v) { return std::expm1(v); });
      const Eigen::ArrayXd growth = em1 / g;
      f = growth * tail - y;
      deriv = tail * ((em1 + 1.0) + h * z * growth);
    }
    const Eigen::ArrayXd err_tol = tol * y.abs().max(1.0);
    if ((f.abs() <= err_tol).all()) return true;
    Eigen::ArrayXd step = f / deriv;
    step = step.min(2.0).max(-2.0);
    z = (z - step).min(z_cap).max(-z_cap);
    if (!z.isFinite().all()) return false;
  }
  // scalar fallback for stragglers; a vertex that strands more than a few
  // percent of the points is rejected outright
  Eigen::Index rescued = 0;
  const Eigen::Index rescue_cap = 8 + n / 20;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double err = std::abs(tgh_transform(z[i], g, h) - y[i]);
    if (!(err <= tol * std::max(1.0, std::abs(y[i])))) {
      if (++rescued > rescue_cap) return false;
      try {
        z[i] = tgh_inverse(y[i], g, h, tol);
      } catch (const numeric_error&) {
        return false;
      }
    }
  }
  return true;
}

struct FamilySpec {
  bool gaussian = false;  // pin xi=0, omega=1, g=h=0
  int p = 0;
  int cond = 0;  // conditioning count, >= p
};

struct DecodedParams {
  TukeySiteParams tukey;
  Eigen::VectorXd phi;
  double innovation_sd = 1.0;
};

// Parameter vector layout.
//
// Transformed family: [xi, log omega, g, h_raw, pacf_raw(1..p)]. The latent
// process is standardized to unit marginal variance, so the innovation scale
// is tied to the partial autocorrelations, S^2 = prod(1 - kappa_j^2).
// Without that constraint the likelihood has an exact flat ridge:
// (omega, g, h, S) -> (omega/c, g/c, h/c^2, c S) leaves the data law
// unchanged, since tau_{g/c, h/c^2}(c z) = c tau_{g,h}(z).
//
// Gaussian family: [pacf_raw(1..p), log S]; no transform, S identifiable.
DecodedParams decode(const Eigen::VectorXd& x, const FamilySpec& fam, double h_max) {
  DecodedParams d;
  int base = 0;
  if (!fam.gaussian) {
    d.tukey.xi = x[0];
    d.tukey.omega = std::exp(x[1]);
    d.tukey.g = x[2];
    d.tukey.h = h_max * logistic(x[3]);
    base = 4;
  }
  Eigen::VectorXd pacf(fam.p);
  for (int j = 0; j < fam.p; ++j)
    pacf[j] = std::clamp(std::tanh(x[base + j]), -0.999999, 0.999999);
  d.phi = detail::pacf_to_ar(pacf);
  if (fam.gaussian) {
    d.innovation_sd = std::exp(x[base + fam.p]);
  } else {
    double var = 1.0;
    for (int j = 0; j < fam.p; ++j) var *= 1.0 - pacf[j] * pacf[j];
    d.innovation_sd = std::sqrt(var);
  }
  return d;
}

int param_dim(const FamilySpec& fam) {
  return fam.gaussian ? fam.p + 1 : fam.p + 4;
}

// Negative conditional log-likelihood. Keeps the latent z between calls as a
// warm start for the bulk inversion.
class SiteObjective {
 public:
  SiteObjective(const Eigen::MatrixXd& series, FamilySpec fam,
                const SiteFitOptions& options)
      : series_(series), fam_(fam), options_(options) {
    z_cache_ = series_.array().min(3.0).max(-3.0);
  }

  double operator()(const Eigen::VectorXd& x) {
    DecodedParams d;
    try {
      d = decode(x, fam_, options_.h_max);
    } catch (const error&) {
      return kInf;
    }
    if (!std::isfinite(d.innovation_sd) || !(d.innovation_sd > 0.0)) return kInf;
    if (!fam_.gaussian &&
        (!std::isfinite(d.tukey.omega) || !(d.tukey.omega > 0.0) ||
         std::abs(d.tukey.g) > 20.0))
      return kInf;

    const Eigen::Index R = series_.rows();
    const Eigen::Index K = series_.cols();
    const int cond = fam_.cond;

    Eigen::ArrayXXd z;
    double jacobian = 0.0;
    if (fam_.gaussian) {
      z = series_.array();
    } else {
      const Eigen::ArrayXXd standardized =
          (series_.array() - d.tukey.xi) / d.tukey.omega;
      Eigen::ArrayXd flat_z =
          Eigen::Map<const Eigen::ArrayXd>(z_cache_.data(), z_cache_.size());
      const Eigen::Map<const Eigen::ArrayXd> flat_y(standardized.data(),
                                                    standardized.size());
      if (!tgh_inverse_bulk(flat_y, d.tukey.g, d.tukey.h, options_.inverse_tol,
                            flat_z))
        return kInf;
      z_cache_ = Eigen::Map<const Eigen::ArrayXXd>(flat_z.data(), R, K);
      z = z_cache_;

      // Jacobian of observation k: -log tau'(z_k) - log omega, for k >= cond.
      const Eigen::ArrayXXd zc = z.rightCols(K - cond);
      Eigen::ArrayXXd tau_prime;
      const Eigen::ArrayXXd tail = (0.5 * d.tukey.h * zc.square()).exp();
      if (std::abs(d.tukey.g) < kTukeySmallG) {
        tau_prime = tail * (1.0 + d.tukey.g * zc +
                            d.tukey.h * zc.square() * (1.0 + 0.5 * d.tukey.g * zc));
      } else {
        const Eigen::ArrayXXd em1 = (d.tukey.g * zc).unaryExpr(
            [](double v) { return std::expm1(v); });
        tau_prime =
            tail * ((em1 + 1.0) + d.tukey.h * zc * em1 / d.tukey.g);
      }
      if (!(tau_prime > 0.0).all()) return kInf;
      jacobian = -tau_prime.log().sum() -
                 double((K - cond) * R) * std::log(d.tukey.omega);
    }

    // Conditional AR terms for k >= cond.
    Eigen::ArrayXXd resid = z.rightCols(K - cond);
    for (int j = 0; j < fam_.p; ++j)
      resid -= d.phi[j] * z.middleCols(cond - 1 - j, K - cond);
    const double rss = resid.square().sum();
    const double n_terms = double((K - cond) * R);
    const double gauss = -n_terms * (kLogSqrt2Pi + std::log(d.innovation_sd)) -
                         rss / (2.0 * d.innovation_sd * d.innovation_sd);

    const double loglik = gauss + jacobian;
    return std::isfinite(loglik) ? -loglik : kInf;
  }

 private:
  const Eigen::MatrixXd& series_;
  FamilySpec fam_;
  SiteFitOptions options_;
  Eigen::ArrayXXd z_cache_;
};

void check_series(const Eigen::MatrixXd& series, int p, int cond) {
  if (series.rows() < 1) throw config_error("fit_site: need at least one realization");
  if (p < 0) throw config_error("fit_site: negative order");
  if (cond < p) throw config_error("fit_site: conditioning count below order");
  if (series.cols() <= cond + 10)
    throw config_error("fit_site: series too short for the requested order");
  if (!series.array().isFinite().all())
    throw data_error("fit_site: non-finite value in series");
  const double mean = series.mean();
  const double var = (series.array() - mean).square().mean();
  if (!(var > 1e-24)) throw data_error("fit_site: degenerate (constant) series");
}

// Pooled sample autocovariances of the rows of x up to lag n_lags.
Eigen::VectorXd pooled_autocov(const Eigen::MatrixXd& x, int n_lags) {
  const Eigen::Index R = x.rows();
  const Eigen::Index K = x.cols();
  const double mean = x.mean();
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(n_lags + 1);
  for (int j = 0; j <= n_lags; ++j) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < R; ++r)
      for (Eigen::Index k = 0; k + j < K; ++k)
        acc += (x(r, k) - mean) * (x(r, k + j) - mean);
    gamma[j] = acc / double(R * (K - j));
  }
  return gamma;
}

// Durbin recursion on autocovariances: partial autocorrelations plus the
// innovation variance at order p.
void durbin(const Eigen::VectorXd& gamma, int p, Eigen::VectorXd& pacf,
            double& innovation_var) {
  pacf.resize(p);
  Eigen::VectorXd phi_prev;
  double v = gamma[0];
  for (int j = 1; j <= p; ++j) {
    double num = gamma[j];
    for (int i = 1; i < j; ++i) num -= phi_prev[i - 1] * gamma[j - i];
    double kappa = v > 0.0 ? num / v : 0.0;
    kappa = std::clamp(kappa, -0.95, 0.95);
    pacf[j - 1] = kappa;
    Eigen::VectorXd phi_new(j);
    phi_new[j - 1] = kappa;
    for (int i = 1; i < j; ++i)
      phi_new[i - 1] = phi_prev[i - 1] - kappa * phi_prev[j - i - 1];
    phi_prev = phi_new;
    v *= (1.0 - kappa * kappa);
  }
  innovation_var = std::max(v, 1e-12);
}

struct InitPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd step;
};

InitPoint initial_point(const Eigen::MatrixXd& series, const FamilySpec& fam,
                        const SiteFitOptions& options) {
  InitPoint init;
  const int dim = param_dim(fam);
  init.x.resize(dim);
  init.step.resize(dim);

  double xi0 = 0.0, omega0 = 1.0, g0 = 0.0, h0 = 0.05;
  Eigen::MatrixXd z0 = series;
  if (!fam.gaussian) {
    std::vector<double> pooled(series.data(), series.data() + series.size());
    const double q10 = sample_quantile(pooled, 0.10);
    const double q25 = sample_quantile(pooled, 0.25);
    const double q50 = sample_quantile(pooled, 0.50);
    const double q75 = sample_quantile(pooled, 0.75);
    const double q90 = sample_quantile(pooled, 0.90);
    xi0 = q50;
    omega0 = (q75 - q25) / 1.349;
    if (!(omega0 > 1e-12))
      omega0 = std::sqrt((series.array() - series.mean()).square().mean());
    const double upper = q90 - q50;
    const double lower = q50 - q10;
    if (upper > 0.0 && lower > 0.0) g0 = std::clamp(std::log(upper / lower), -1.0, 1.0);

    Eigen::ArrayXd flat_z = Eigen::ArrayXd::Zero(series.size());
    const Eigen::ArrayXd flat_y =
        (Eigen::Map<const Eigen::ArrayXd>(series.data(), series.size()) - xi0) /
        omega0;
    flat_z = flat_y.min(3.0).max(-3.0);
    if (tgh_inverse_bulk(flat_y, g0, h0, 1e-9, flat_z))
      z0 = Eigen::Map<const Eigen::MatrixXd>(flat_z.data(), series.rows(),
                                             series.cols());
  }

  Eigen::VectorXd pacf0(fam.p);
  double innov_var = 1.0;
  if (fam.p > 0) {
    const Eigen::VectorXd gamma = pooled_autocov(z0, fam.p);
    durbin(gamma, fam.p, pacf0, innov_var);
  } else {
    innov_var = (z0.array() - z0.mean()).square().mean();
  }
  const double s0 = std::sqrt(std::max(innov_var, 1e-12));

  int base = 0;
  if (!fam.gaussian) {
    init.x[0] = xi0;
    init.x[1] = std::log(omega0);
    init.x[2] = g0;
    init.x[3] = logit(std::clamp(h0 / options.h_max, 1e-3, 1.0 - 1e-3));
    init.step[0] = 0.25 * omega0;
    init.step[1] = 0.25;
    init.step[2] = 0.15;
    init.step[3] = 0.75;
    base = 4;
  }
  for (int j = 0; j < fam.p; ++j) {
    init.x[base + j] = std::atanh(std::clamp(pacf0[j], -0.95, 0.95));
    init.step[base + j] = 0.2;
  }
  if (fam.gaussian) {
    init.x[base + fam.p] = std::log(s0);
    init.step[base + fam.p] = 0.25;
  }
  return init;
}

SiteFitResult fit_family(const Eigen::MatrixXd& series, const FamilySpec& fam,
                         const SiteFitOptions& options) {
  check_series(series, fam.p, fam.cond);

  SiteObjective objective(series, fam, options);
  const InitPoint init = initial_point(series, fam, options);

  OptimOptions opt;
  opt.max_evals = options.max_evals;
  opt.rel_ftol = options.rel_ftol;
  opt.polish_passes = options.polish_passes;
  const OptimResult best = minimize(
      [&objective](const Eigen::VectorXd& x) { return objective(x); }, init.x,
      init.step, opt);
  if (!std::isfinite(best.f))
    throw numeric_error("fit_site: optimizer failed to find a feasible point");

  const DecodedParams d = decode(best.x, fam, options.h_max);
  SiteFitResult result;
  result.tukey = d.tukey;
  result.temporal.p = fam.p;
  result.temporal.phi = d.phi;
  result.temporal.innovation_sd = d.innovation_sd;
  result.loglik = -best.f;
  result.n_obs = series.rows() * (series.cols() - fam.cond);
  result.n_params = (fam.gaussian ? 0 : 4) + fam.p + 1;
  result.bic = -2.0 * result.loglik +
               double(result.n_params) * std::log(double(result.n_obs));
  result.tukey.validate(options.h_max);
  result.temporal.validate();
  return result;
}

}  // namespace

namespace detail {

Eigen::VectorXd pacf_to_ar(const Eigen::VectorXd& pacf) {
  Eigen::VectorXd phi;
  for (int j = 1; j <= pacf.size(); ++j) {
    Eigen::VectorXd next(j);
    next[j - 1] = pacf[j - 1];
    for (int i = 1; i < j; ++i)
      next[i - 1] = phi[i - 1] - pacf[j - 1] * phi[j - i - 1];
    phi = next;
  }
  return phi;
}

Eigen::VectorXd ar_to_pacf(const Eigen::VectorXd& phi) {
  Eigen::VectorXd pacf(phi.size());
  Eigen::VectorXd work = phi;
  for (int j = int(phi.size()); j >= 1; --j) {
    const double kappa = work[j - 1];
    if (!(std::abs(kappa) < 1.0))
      throw numeric_error("ar_to_pacf: non-stationary coefficients");
    pacf[j - 1] = kappa;
    Eigen::VectorXd prev(j - 1);
    const double denom = 1.0 - kappa * kappa;
    for (int i = 1; i < j; ++i)
      prev[i - 1] = (work[i - 1] + kappa * work[j - i - 1]) / denom;
    work = prev;
  }
  return pacf;
}

}  // namespace detail

bool TemporalSiteParams::is_stationary() const {
  if (p == 0) return true;
  if (phi.size() != p) return false;
  // companion-matrix spectral radius < 1
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  companion.row(0) = phi.transpose();
  for (int i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  const Eigen::VectorXcd eig = companion.eigenvalues();
  return eig.cwiseAbs().maxCoeff() < 1.0 - 1e-12;
}

void TemporalSiteParams::validate() const {
  if (p < 0) throw config_error("TemporalSiteParams: negative order");
  if (phi.size() != p) throw config_error("TemporalSiteParams: phi length mismatch");
  if (!(innovation_sd > 0.0) || !std::isfinite(innovation_sd))
    throw config_error("TemporalSiteParams: innovation_sd must be positive");
  if (!is_stationary())
    throw config_error("TemporalSiteParams: coefficients are not stationary");
}

SiteFitResult fit_site(const Eigen::MatrixXd& series, int p,
                       const SiteFitOptions& options) {
  FamilySpec fam;
  fam.gaussian = false;
  fam.p = p;
  fam.cond = p;
  return fit_family(series, fam, options);
}

SiteFitResult fit_site_gaussian(const Eigen::MatrixXd& series, int p,
                                const SiteFitOptions& options) {
  FamilySpec fam;
  fam.gaussian = true;
  fam.p = p;
  fam.cond = p;
  return fit_family(series, fam, options);
}

int select_order(const Eigen::MatrixXd& series, int p_max,
                 const SiteFitOptions& options) {
  if (p_max < 0) throw config_error("select_order: p_max must be >= 0");
  int best_p = -1;
  double best_bic = kInf;
  for (int p = 0; p <= p_max; ++p) {
    FamilySpec fam;
    fam.gaussian = false;
    fam.p = p;
    fam.cond = p_max;  // common conditional sample keeps BICs comparable
    const SiteFitResult fit = fit_family(series, fam, options);
    if (fit.bic < best_bic) {
      best_bic = fit.bic;
      best_p = p;
    }
  }
  if (best_p < 0) throw numeric_error("select_order: all orders failed");
  return best_p;
}

Eigen::MatrixXd site_residuals(const Eigen::MatrixXd& series, const SiteFitResult& fit,
                               double inverse_tol) {
  fit.tukey.validate();
  fit.temporal.validate();
  const Eigen::Index R = series.rows();
  const Eigen::Index K = series.cols();
  const int p = fit.temporal.p;
  if (K <= p) throw config_error("site_residuals: series shorter than the order");
  if (!series.array().isFinite().all())
    throw data_error("site_residuals: non-finite value in series");

  const Eigen::ArrayXd flat_y =
      (Eigen::Map<const Eigen::ArrayXd>(series.data(), series.size()) -
       fit.tukey.xi) /
      fit.tukey.omega;
  Eigen::ArrayXd flat_z = flat_y.min(3.0).max(-3.0);
  if (!tgh_inverse_bulk(flat_y, fit.tukey.g, fit.tukey.h, inverse_tol, flat_z))
    throw numeric_error("site_residuals: inversion failed");
  const Eigen::MatrixXd z =
      Eigen::Map<const Eigen::MatrixXd>(flat_z.data(), R, K);

  Eigen::MatrixXd out(R, K - p);
  for (Eigen::Index r = 0; r < R; ++r) {
    for (Eigen::Index k = p; k < K; ++k) {
      double pred = 0.0;
      for (int j = 0; j < p; ++j) pred += fit.temporal.phi[j] * z(r, k - 1 - j);
      out(r, k - p) = (z(r, k) - pred) / fit.temporal.innovation_sd;
    }
  }
  return out;
}

double bic_delta_gaussian(const Eigen::MatrixXd& series, int p_max,
                          const SiteFitOptions& options) {
  if (p_max < 0) throw config_error("bic_delta_gaussian: p_max must be >= 0");
  double best_tgh = kInf, best_gar = kInf;
  for (int p = 0; p <= p_max; ++p) {
    FamilySpec fam;
    fam.p = p;
    fam.cond = p_max;
    fam.gaussian = false;
    best_tgh = std::min(best_tgh, fit_family(series, fam, options).bic);
    fam.gaussian = true;
    best_gar = std::min(best_gar, fit_family(series, fam, options).bic);
  }
  return best_gar - best_tgh;
}

Eigen::VectorXd ar_stationary_autocov(const Eigen::VectorXd& phi,
                                      double innovation_sd, int n_lags) {
  const int p = int(phi.size());
  if (!(innovation_sd > 0.0))
    throw config_error("ar_stationary_autocov: innovation_sd must be positive");
  if (n_lags < 0) throw config_error("ar_stationary_autocov: negative lag count");
  const double s2 = innovation_sd * innovation_sd;

  Eigen::VectorXd gamma(std::max(n_lags + 1, p + 1));
  if (p == 0) {
    gamma.setZero();
    gamma[0] = s2;
  } else {
    // Yule-Walker: gamma(j) - sum_i phi_i gamma(|j-i|) = s2 * [j == 0]
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(p + 1, p + 1);
    for (int j = 0; j <= p; ++j)
      for (int i = 1; i <= p; ++i) A(j, std::abs(j - i)) -= phi[i - 1];
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p + 1);
    rhs[0] = s2;
    const Eigen::VectorXd head = A.fullPivLu().solve(rhs);
    gamma.head(p + 1) = head;
    for (int j = p + 1; j < gamma.size(); ++j) {
      double acc = 0.0;
      for (int i = 1; i <= p; ++i) acc += phi[i - 1] * gamma[j - i];
      gamma[j] = acc;
    }
  }
  return gamma.head(n_lags + 1);
}

Eigen::MatrixXd simulate_site(const TukeySiteParams& tukey,
                              const TemporalSiteParams& temporal,
                              Eigen::Index n_time, Eigen::Index n_real,
                              CounterRng& rng) {
  tukey.validate();
  temporal.validate();
  if (n_time < 1 || n_real < 1)
    throw config_error("simulate_site: dimensions must be >= 1");
  const int p = temporal.p;

  Eigen::MatrixXd latent(n_real, n_time);
  Eigen::LLT<Eigen::MatrixXd> chol;
  if (p > 0) {
    const Eigen::VectorXd gamma =
        ar_stationary_autocov(temporal.phi, temporal.innovation_sd, p - 1);
    Eigen::MatrixXd cov(p, p);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < p; ++j) cov(i, j) = gamma[std::abs(i - j)];
    chol.compute(cov);
    if (chol.info() != Eigen::Success)
      throw numeric_error("simulate_site: stationary covariance not PD");
  }

  for (Eigen::Index r = 0; r < n_real; ++r) {
    Eigen::VectorXd state = Eigen::VectorXd::Zero(std::max(p, 1));
    if (p > 0) state.head(p) = chol.matrixL() * rng.normals(p);
    // state[j] holds the latent value at lag j+1 (state[0] most recent)
    for (Eigen::Index k = 0; k < n_time; ++k) {
      double value = temporal.innovation_sd * rng.next_normal();
      for (int j = 0; j < p; ++j) value += temporal.phi[j] * state[j];
      latent(r, k) = value;
      for (int j = std::max(p, 1) - 1; j > 0; --j) state[j] = state[j - 1];
      state[0] = value;
    }
  }

  Eigen::MatrixXd out(n_real, n_time);
  for (Eigen::Index r = 0; r < n_real; ++r)
    for (Eigen::Index k = 0; k < n_time; ++k)
      out(r, k) =
          tukey.xi + tukey.omega * tgh_transform(latent(r, k), tukey.g, tukey.h);
  return out;
}

}  // namespace swg
