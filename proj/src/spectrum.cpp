#include "swg/spectrum.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "swg/optimize.hpp"

namespace swg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.83787706640934548356;

void check_band(const GeoMask& mask, Eigen::Index band) {
  if (band < 0 || band >= mask.n_lat())
    throw config_error("spectrum: band index out of range");
}

}  // namespace

double matern_spectrum(Eigen::Index c, const MaternSpectrumParams& params,
                       Eigen::Index n_lon) {
  params.validate();
  if (n_lon < 1 || c < 0 || c >= n_lon)
    throw config_error("matern_spectrum: wavenumber out of range");
  // fold to min(c, N-c) so the c <-> N-c symmetry holds bitwise
  const Eigen::Index folded = std::min(c, n_lon - c);
  const double s = std::sin(double(folded) * kPi / double(n_lon));
  return params.variance *
         std::pow(params.inverse_range * params.inverse_range + 4.0 * s * s,
                  -params.smoothness - 0.5);
}

double altitude_link(double beta, double gamma, double altitude_m) {
  if (!(beta > 0.0)) throw config_error("altitude_link: beta must be positive");
  return beta * std::exp(std::atan(altitude_m * gamma));
}

void BandSpectrumParams::validate() const {
  for (int j = 0; j < 3; ++j)
    if (!(beta_variance[j] > 0.0) || !(beta_inverse_range[j] > 0.0) ||
        !(beta_smoothness[j] > 0.0))
      throw config_error("BandSpectrumParams: beta parameters must be positive");
  if (!std::isfinite(gamma_variance) || !std::isfinite(gamma_inverse_range) ||
      !std::isfinite(gamma_smoothness))
    throw config_error("BandSpectrumParams: non-finite gamma");
  if (taper_dilate < 0)
    throw config_error("BandSpectrumParams: taper_dilate must be >= 0");
  if (!(taper_halfwidth > 0.0))
    throw config_error("BandSpectrumParams: taper_halfwidth must be positive");
}

MaternSpectrumParams site_matern_params(const BandSpectrumParams& params,
                                        SurfaceClass cls, double altitude_m) {
  params.validate();
  MaternSpectrumParams out;
  switch (cls) {
    case SurfaceClass::high_mountain:
      out.variance = altitude_link(params.beta_variance[0], params.gamma_variance,
                                   altitude_m);
      out.inverse_range = altitude_link(params.beta_inverse_range[0],
                                        params.gamma_inverse_range, altitude_m);
      out.smoothness = altitude_link(params.beta_smoothness[0],
                                     params.gamma_smoothness, altitude_m);
      break;
    case SurfaceClass::land:
      out.variance = altitude_link(params.beta_variance[1], params.gamma_variance,
                                   altitude_m);
      out.inverse_range = altitude_link(params.beta_inverse_range[1],
                                        params.gamma_inverse_range, altitude_m);
      out.smoothness = altitude_link(params.beta_smoothness[1],
                                     params.gamma_smoothness, altitude_m);
      break;
    case SurfaceClass::ocean:
      out.variance = params.beta_variance[2];
      out.inverse_range = params.beta_inverse_range[2];
      out.smoothness = params.beta_smoothness[2];
      break;
  }
  return out;
}

Eigen::VectorXd land_taper(const GeoMask& mask, Eigen::Index band, int taper_dilate,
                           double taper_halfwidth) {
  check_band(mask, band);
  if (taper_dilate < 0) throw config_error("land_taper: taper_dilate must be >= 0");
  if (!(taper_halfwidth > 0.0))
    throw config_error("land_taper: taper_halfwidth must be positive");
  const Eigen::Index n = mask.n_lon();

  // dilated land/mountain indicator with circular index arithmetic
  Eigen::ArrayXd indicator = Eigen::ArrayXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!mask.is_land_or_mountain(band, j)) continue;
    for (Eigen::Index d = -taper_dilate; d <= taper_dilate; ++d)
      indicator[((j + d) % n + n) % n] = 1.0;
  }

  // normalized triangular kernel over circular offsets
  Eigen::ArrayXd kernel = Eigen::ArrayXd::Zero(n);
  double total = 0.0;
  for (Eigen::Index d = 0; d < n; ++d) {
    const double dist = double(std::min(d, n - d));
    kernel[d] = std::max(0.0, 1.0 - dist / taper_halfwidth);
    total += kernel[d];
  }
  kernel /= total;

  Eigen::VectorXd weights(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0.0;
    for (Eigen::Index jp = 0; jp < n; ++jp)
      acc += indicator[jp] * kernel[((j - jp) % n + n) % n];
    weights[j] = std::min(1.0, std::max(0.0, acc));
  }
  return weights;
}

EvolutionarySpectrum build_spectrum(const BandSpectrumParams& params,
                                    const GeoMask& mask, Eigen::Index band) {
  params.validate();
  check_band(mask, band);
  const Eigen::Index n = mask.n_lon();

  const Eigen::VectorXd taper =
      land_taper(mask, band, params.taper_dilate, params.taper_halfwidth);

  EvolutionarySpectrum spectrum;
  spectrum.amplitude.resize(n, n);
  for (Eigen::Index site = 0; site < n; ++site) {
    const SurfaceClass cls = mask.cls(band, site);
    const MaternSpectrumParams site_params =
        site_matern_params(params, cls, mask.altitude(band, site));
    double weight = 1.0;
    if (cls == SurfaceClass::land)
      weight = taper[site];
    else if (cls == SurfaceClass::ocean)
      weight = 1.0 - taper[site];
    for (Eigen::Index c = 0; c < n; ++c)
      spectrum.amplitude(site, c) =
          weight * std::sqrt(matern_spectrum(c, site_params, n));
  }
  return spectrum;
}

namespace {

void check_hermitian(const Eigen::VectorXcd& coeffs) {
  const Eigen::Index n = coeffs.size();
  const double tol = 1e-9;
  if (std::abs(coeffs[0].imag()) > tol * (1.0 + std::abs(coeffs[0].real())))
    throw data_error("synthesize_band: coefficient 0 must be real");
  if (n % 2 == 0) {
    const auto& nyq = coeffs[n / 2];
    if (std::abs(nyq.imag()) > tol * (1.0 + std::abs(nyq.real())))
      throw data_error("synthesize_band: Nyquist coefficient must be real");
  }
  for (Eigen::Index c = 1; c < n; ++c) {
    const std::complex<double> diff = coeffs[c] - std::conj(coeffs[n - c]);
    if (std::abs(diff) > tol * (1.0 + std::abs(coeffs[c])))
      throw data_error("synthesize_band: coefficients break Hermitian symmetry");
  }
}

}  // namespace

Eigen::VectorXd synthesize_band(const EvolutionarySpectrum& spectrum,
                                const Eigen::VectorXcd& coeffs) {
  const Eigen::Index n = spectrum.n_lon();
  if (coeffs.size() != n)
    throw config_error("synthesize_band: coefficient length mismatch");
  check_hermitian(coeffs);

  Eigen::VectorXd out(n);
  double max_abs_real = 0.0;
  double max_abs_imag = 0.0;
  for (Eigen::Index site = 0; site < n; ++site) {
    std::complex<double> acc(0.0, 0.0);
    for (Eigen::Index c = 0; c < n; ++c) {
      const double phase = 2.0 * kPi * double(site) * double(c) / double(n);
      acc += spectrum.amplitude(site, c) *
             std::complex<double>(std::cos(phase), std::sin(phase)) * coeffs[c];
    }
    out[site] = acc.real();
    max_abs_real = std::max(max_abs_real, std::abs(acc.real()));
    max_abs_imag = std::max(max_abs_imag, std::abs(acc.imag()));
  }
  if (max_abs_imag > 1e-10 * std::max(1.0, max_abs_real))
    throw numeric_error("synthesize_band: output is not real");
  return out;
}

Eigen::MatrixXd synthesis_matrix(const EvolutionarySpectrum& spectrum) {
  const Eigen::Index n = spectrum.n_lon();
  const double sqrt2 = std::sqrt(2.0);
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index site = 0; site < n; ++site) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool self_conjugate = (j == 0) || (n % 2 == 0 && j == n / 2);
      const Eigen::Index c = (j <= n / 2) ? j : n - j;
      const double phase = 2.0 * kPi * double(site) * double(c) / double(n);
      const double amp = spectrum.amplitude(site, c);
      if (self_conjugate)
        b(site, j) = amp * std::cos(phase);
      else if (j < n - j)  // real part slot of wavenumber c
        b(site, j) = sqrt2 * amp * std::cos(phase);
      else  // imaginary part slot of wavenumber c
        b(site, j) = -sqrt2 * amp * std::sin(phase);
    }
  }
  return b;
}

Eigen::MatrixXd band_covariance(const EvolutionarySpectrum& spectrum) {
  const Eigen::Index n = spectrum.n_lon();
  Eigen::MatrixXd cosine(n, n), sine(n, n);
  for (Eigen::Index site = 0; site < n; ++site) {
    for (Eigen::Index c = 0; c < n; ++c) {
      const double phase = 2.0 * kPi * double(site) * double(c) / double(n);
      cosine(site, c) = spectrum.amplitude(site, c) * std::cos(phase);
      sine(site, c) = spectrum.amplitude(site, c) * std::sin(phase);
    }
  }
  return cosine * cosine.transpose() + sine * sine.transpose();
}

// ---------------------------------------------------------------------------
// band fitting

namespace {

// Which surface classes appear in a band decides which parameters are live.
struct BandLayout {
  bool has_mountain = false;
  bool has_land = false;
  bool has_ocean = false;
  bool taper_live = false;   // mixed land/ocean band
  bool altitude_live = false;
  SpectrumModel model = SpectrumModel::full;

  // vector layout: log-betas for live classes (variance, inverse_range,
  // smoothness per class), then gammas if live, then log taper halfwidth.
  int dim = 0;
  int idx_gamma = -1;
  int idx_halfwidth = -1;
};

BandLayout make_layout(const GeoMask& mask, Eigen::Index band, SpectrumModel model) {
  BandLayout layout;
  layout.model = model;
  for (Eigen::Index j = 0; j < mask.n_lon(); ++j) {
    switch (mask.cls(band, j)) {
      case SurfaceClass::high_mountain: layout.has_mountain = true; break;
      case SurfaceClass::land: layout.has_land = true; break;
      case SurfaceClass::ocean: layout.has_ocean = true; break;
    }
  }
  layout.taper_live =
      layout.has_ocean && (layout.has_land || layout.has_mountain);
  layout.altitude_live = (layout.has_mountain || layout.has_land) &&
                         model == SpectrumModel::full;

  int classes = 0;
  if (model == SpectrumModel::full) {
    classes = int(layout.has_mountain) + int(layout.has_land) + int(layout.has_ocean);
  } else {
    // no-altitude model ties mountain and land to one shared class
    classes = int(layout.has_mountain || layout.has_land) + int(layout.has_ocean);
  }
  layout.dim = 3 * classes;
  if (layout.altitude_live) {
    layout.idx_gamma = layout.dim;
    layout.dim += 3;
  }
  if (layout.taper_live) {
    layout.idx_halfwidth = layout.dim;
    layout.dim += 1;
  }
  return layout;
}

// Unpack the optimizer vector into band parameters (taper_dilate is handled
// by an outer integer search).
BandSpectrumParams unpack_band(const Eigen::VectorXd& x, const BandLayout& layout,
                               int taper_dilate) {
  BandSpectrumParams params;
  int pos = 0;
  const auto pull_class = [&](int cls_index) {
    params.beta_variance[cls_index] = std::exp(x[pos + 0]);
    params.beta_inverse_range[cls_index] = std::exp(x[pos + 1]);
    params.beta_smoothness[cls_index] = std::exp(x[pos + 2]);
    pos += 3;
  };
  if (layout.model == SpectrumModel::full) {
    if (layout.has_mountain) pull_class(0);
    if (layout.has_land) pull_class(1);
    if (layout.has_ocean) pull_class(2);
    if (!layout.has_mountain) {
      params.beta_variance[0] = params.beta_variance[1];
      params.beta_inverse_range[0] = params.beta_inverse_range[1];
      params.beta_smoothness[0] = params.beta_smoothness[1];
    }
    if (!layout.has_land) {
      params.beta_variance[1] = params.beta_variance[0];
      params.beta_inverse_range[1] = params.beta_inverse_range[0];
      params.beta_smoothness[1] = params.beta_smoothness[0];
    }
  } else {
    if (layout.has_mountain || layout.has_land) {
      pull_class(0);
      params.beta_variance[1] = params.beta_variance[0];
      params.beta_inverse_range[1] = params.beta_inverse_range[0];
      params.beta_smoothness[1] = params.beta_smoothness[0];
    }
    if (layout.has_ocean) pull_class(2);
  }
  if (layout.altitude_live) {
    params.gamma_variance = x[layout.idx_gamma + 0];
    params.gamma_inverse_range = x[layout.idx_gamma + 1];
    params.gamma_smoothness = x[layout.idx_gamma + 2];
  }
  params.taper_dilate = taper_dilate;
  if (layout.taper_live) params.taper_halfwidth = std::exp(x[layout.idx_halfwidth]);
  return params;
}

Eigen::VectorXd pack_band(const BandSpectrumParams& params, const BandLayout& layout) {
  Eigen::VectorXd x(layout.dim);
  int pos = 0;
  const auto push_class = [&](int cls_index) {
    x[pos + 0] = std::log(params.beta_variance[cls_index]);
    x[pos + 1] = std::log(params.beta_inverse_range[cls_index]);
    x[pos + 2] = std::log(params.beta_smoothness[cls_index]);
    pos += 3;
  };
  if (layout.model == SpectrumModel::full) {
    if (layout.has_mountain) push_class(0);
    if (layout.has_land) push_class(1);
    if (layout.has_ocean) push_class(2);
  } else {
    if (layout.has_mountain || layout.has_land)
      push_class(layout.has_mountain && !layout.has_land ? 0 : 1);
    if (layout.has_ocean) push_class(2);
  }
  if (layout.altitude_live) {
    x[layout.idx_gamma + 0] = params.gamma_variance;
    x[layout.idx_gamma + 1] = params.gamma_inverse_range;
    x[layout.idx_gamma + 2] = params.gamma_smoothness;
  }
  if (layout.taper_live) x[layout.idx_halfwidth] = std::log(params.taper_halfwidth);
  return x;
}

// Negative pooled Gaussian log-likelihood via the second-moment matrix:
//   nll = 0.5 * (n logdet Sigma + tr(Sigma^{-1} T) + n N log 2 pi)
class BandObjective {
 public:
  BandObjective(const Eigen::MatrixXd& replicates, const GeoMask& mask,
                Eigen::Index band, BandLayout layout, int taper_dilate)
      : mask_(mask), band_(band), layout_(layout), taper_dilate_(taper_dilate) {
    n_rep_ = replicates.rows();
    second_moment_ = replicates.transpose() * replicates;
  }

  double operator()(const Eigen::VectorXd& x) const {
    BandSpectrumParams params;
    try {
      params = unpack_band(x, layout_, taper_dilate_);
      params.validate();
    } catch (const error&) {
      return kInf;
    }
    if ((x.array().abs() > 40.0).any()) return kInf;

    Eigen::MatrixXd cov;
    try {
      cov = band_covariance(build_spectrum(params, mask_, band_));
    } catch (const error&) {
      return kInf;
    }
    const Eigen::Index n = cov.rows();

    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      // near-singular covariance (taper zeros): ridge on the diagonal
      cov.diagonal().array() += 1e-8 * cov.trace() / double(n);
      llt.compute(cov);
      if (llt.info() != Eigen::Success) return kInf;
    }
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      logdet += 2.0 * std::log(llt.matrixL()(i, i));
    const double quad = llt.solve(second_moment_).trace();
    const double nll = 0.5 * (double(n_rep_) * logdet + quad +
                              double(n_rep_) * double(n) * kLog2Pi);
    return std::isfinite(nll) ? nll : kInf;
  }

  Eigen::Index n_rep() const { return n_rep_; }
  double mean_variance() const {
    return second_moment_.trace() / double(n_rep_ * second_moment_.rows());
  }

 private:
  const GeoMask& mask_;
  Eigen::Index band_;
  BandLayout layout_;
  int taper_dilate_;
  Eigen::Index n_rep_ = 0;
  Eigen::MatrixXd second_moment_;
};

BandSpectrumParams initial_band_params(double mean_variance, Eigen::Index n_lon) {
  // choose the variance scale so the implied site variance matches the data
  MaternSpectrumParams unit;
  unit.variance = 1.0;
  unit.inverse_range = 1.0;
  unit.smoothness = 0.5;
  double site_var = 0.0;
  for (Eigen::Index c = 0; c < n_lon; ++c) site_var += matern_spectrum(c, unit, n_lon);
  const double psi0 = std::max(mean_variance, 1e-8) / site_var;

  BandSpectrumParams params;
  params.beta_variance.setConstant(psi0);
  params.beta_inverse_range.setConstant(1.0);
  params.beta_smoothness.setConstant(0.5);
  params.taper_dilate = 0;
  params.taper_halfwidth = 1.5;
  return params;
}

struct CandidateFit {
  BandSpectrumParams params;
  double loglik = -kInf;
};

CandidateFit fit_with_layout(const Eigen::MatrixXd& replicates, const GeoMask& mask,
                             Eigen::Index band, const BandLayout& layout,
                             const std::vector<BandSpectrumParams>& starts,
                             const BandFitOptions& options) {
  CandidateFit best;
  const int dilate_hi = layout.taper_live ? options.taper_dilate_max : 0;
  for (int dilate = 0; dilate <= dilate_hi; ++dilate) {
    BandObjective objective(replicates, mask, band, layout, dilate);
    for (const BandSpectrumParams& start : starts) {
      const Eigen::VectorXd x0 = pack_band(start, layout);
      Eigen::VectorXd step = Eigen::VectorXd::Constant(layout.dim, 0.35);
      OptimOptions opt;
      opt.max_evals = options.max_evals;
      opt.rel_ftol = options.rel_ftol;
      const OptimResult r = minimize(
          [&objective](const Eigen::VectorXd& x) { return objective(x); }, x0, step,
          opt);
      if (-r.f > best.loglik) {
        best.loglik = -r.f;
        best.params = unpack_band(r.x, layout, dilate);
      }
    }
  }
  if (!std::isfinite(best.loglik))
    throw numeric_error("fit_band: no feasible parameter point found");
  return best;
}

}  // namespace

BandFitResult fit_band(const Eigen::MatrixXd& replicates, const GeoMask& mask,
                       Eigen::Index band, SpectrumModel model,
                       const BandFitOptions& options) {
  check_band(mask, band);
  if (replicates.cols() != mask.n_lon())
    throw config_error("fit_band: replicate length does not match the grid");
  if (replicates.rows() < 3)
    throw numeric_error("fit_band: need at least 3 replicates");
  if (!replicates.array().isFinite().all())
    throw data_error("fit_band: non-finite replicate value");

  const double mean_var =
      replicates.array().square().sum() / double(replicates.size());
  const BandSpectrumParams start0 = initial_band_params(mean_var, mask.n_lon());

  // no-altitude fit first; it seeds the full model so nesting holds exactly
  const BandLayout lao_layout = make_layout(mask, band, SpectrumModel::no_altitude);
  const CandidateFit lao =
      fit_with_layout(replicates, mask, band, lao_layout, {start0}, options);

  BandFitResult result;
  result.n_replicates = replicates.rows();
  result.model = model;
  if (model == SpectrumModel::no_altitude) {
    result.params = lao.params;
    result.loglik = lao.loglik;
    return result;
  }

  const BandLayout full_layout = make_layout(mask, band, SpectrumModel::full);
  BandSpectrumParams lifted = lao.params;  // gamma = 0, classes already tied
  const CandidateFit full = fit_with_layout(replicates, mask, band, full_layout,
                                            {start0, lifted}, options);
  if (full.loglik >= lao.loglik) {
    result.params = full.params;
    result.loglik = full.loglik;
  } else {
    result.params = lao.params;
    result.loglik = lao.loglik;
  }
  return result;
}

}  // namespace swg
