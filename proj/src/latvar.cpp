#include "swg/latvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "swg/optimize.hpp"

namespace swg {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.83787706640934548356;
constexpr double kZetaCap = 1.0 - 1e-6;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void LatVarParams::validate() const {
  if (!(std::abs(a) < 1.0) || !(std::abs(b) < 1.0))
    throw config_error("LatVarParams: |a| and |b| must be below 1");
  if (!(zeta >= 0.0) || !(zeta <= 1.0))
    throw config_error("LatVarParams: zeta must lie in [0, 1]");
  if (!(eta > 0.0)) throw config_error("LatVarParams: eta must be positive");
}

double coherence(Eigen::Index c, double zeta, double eta, Eigen::Index n) {
  if (n < 1 || c < 0 || c >= n) throw config_error("coherence: wavenumber out of range");
  const double z = std::min(zeta, kZetaCap);
  // fold to min(c, N-c) so paired packed slots carry bitwise-equal weights
  const Eigen::Index folded = std::min(c, n - c);
  const double s = std::sin(double(folded) * kPi / double(n));
  return z * std::pow(1.0 + 4.0 * s * s, -eta);
}

Eigen::VectorXd coherence_vector(const LatVarParams& params, Eigen::Index n) {
  params.validate();
  Eigen::VectorXd out(n);
  for (Eigen::Index c = 0; c < n; ++c) out[c] = coherence(c, params.zeta, params.eta, n);
  return out;
}

Eigen::MatrixXd build_transition(const LatVarParams& params, Eigen::Index n) {
  const Eigen::VectorXd phi = coherence_vector(params, n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    p(c, c) = phi[c];
    const double off = 0.5 * (1.0 - phi[c]);
    p(c, (c - 1 + n) % n) += params.a * off;
    p(c, (c + 1) % n) += params.b * off;
  }
  return p;
}

Eigen::VectorXd innovation_variances(const LatVarParams& params, Eigen::Index n) {
  const Eigen::VectorXd phi = coherence_vector(params, n);
  return (1.0 - phi.array().square()).matrix();
}

Eigen::VectorXd pack_hermitian(const Eigen::VectorXcd& coeffs) {
  const Eigen::Index n = coeffs.size();
  if (n < 1) throw config_error("pack_hermitian: empty coefficient vector");
  const double tol = 1e-9;
  const double sqrt2 = std::sqrt(2.0);
  Eigen::VectorXd packed(n);
  if (std::abs(coeffs[0].imag()) > tol * (1.0 + std::abs(coeffs[0].real())))
    throw data_error("pack_hermitian: coefficient 0 must be real");
  packed[0] = coeffs[0].real();
  if (n % 2 == 0 && n > 1) {
    if (std::abs(coeffs[n / 2].imag()) > tol * (1.0 + std::abs(coeffs[n / 2].real())))
      throw data_error("pack_hermitian: Nyquist coefficient must be real");
    packed[n / 2] = coeffs[n / 2].real();
  }
  for (Eigen::Index c = 1; 2 * c < n; ++c) {
    const std::complex<double> diff = coeffs[c] - std::conj(coeffs[n - c]);
    if (std::abs(diff) > tol * (1.0 + std::abs(coeffs[c])))
      throw data_error("pack_hermitian: coefficients break Hermitian symmetry");
    packed[c] = sqrt2 * coeffs[c].real();
    packed[n - c] = sqrt2 * coeffs[c].imag();
  }
  return packed;
}

Eigen::VectorXcd unpack_hermitian(const Eigen::VectorXd& packed) {
  const Eigen::Index n = packed.size();
  if (n < 1) throw config_error("unpack_hermitian: empty vector");
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Eigen::VectorXcd coeffs(n);
  coeffs[0] = std::complex<double>(packed[0], 0.0);
  if (n % 2 == 0 && n > 1) coeffs[n / 2] = std::complex<double>(packed[n / 2], 0.0);
  for (Eigen::Index c = 1; 2 * c < n; ++c) {
    coeffs[c] =
        std::complex<double>(inv_sqrt2 * packed[c], inv_sqrt2 * packed[n - c]);
    coeffs[n - c] = std::conj(coeffs[c]);
  }
  return coeffs;
}

Eigen::VectorXd propagate(const Eigen::VectorXd& packed_prev,
                          const LatVarParams& params,
                          const Eigen::VectorXd& packed_innovation) {
  const Eigen::Index n = packed_prev.size();
  if (packed_innovation.size() != n)
    throw config_error("propagate: innovation length mismatch");
  const Eigen::VectorXd phi = coherence_vector(params, n);
  Eigen::VectorXd out(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const double off = 0.5 * (1.0 - phi[c]);
    out[c] = phi[c] * packed_prev[c] +
             params.a * off * packed_prev[(c - 1 + n) % n] +
             params.b * off * packed_prev[(c + 1) % n] + packed_innovation[c];
  }
  return out;
}

Eigen::VectorXcd propagate(const Eigen::VectorXcd& prev, const LatVarParams& params,
                           const Eigen::VectorXcd& innovation) {
  return unpack_hermitian(
      propagate(pack_hermitian(prev), params, pack_hermitian(innovation)));
}

// ---------------------------------------------------------------------------
// fitting

namespace {

struct PairData {
  const Eigen::MatrixXd* prev = nullptr;  // rows: replicates, cols: N
  const Eigen::MatrixXd* cur = nullptr;
  std::vector<Eigen::Index> rows;  // replicate rows belonging to the block
};

// Negative conditional Gaussian log-likelihood of (cur | prev) over the
// selected rows.
class PairObjective {
 public:
  PairObjective(const PairData& data, LatModel model) : data_(data), model_(model) {}

  static LatVarParams decode(const Eigen::VectorXd& x, LatModel model) {
    LatVarParams p;
    int pos = 0;
    if (model == LatModel::full) {
      p.a = std::tanh(x[pos++]);
      p.b = std::tanh(x[pos++]);
    }
    p.zeta = kZetaCap * logistic(x[pos++]);
    p.eta = std::exp(x[pos]);
    return p;
  }

  static Eigen::VectorXd encode(const LatVarParams& p, LatModel model) {
    Eigen::VectorXd x(model == LatModel::full ? 4 : 2);
    int pos = 0;
    if (model == LatModel::full) {
      x[pos++] = std::atanh(std::clamp(p.a, -0.999, 0.999));
      x[pos++] = std::atanh(std::clamp(p.b, -0.999, 0.999));
    }
    const double frac = std::clamp(p.zeta / kZetaCap, 1e-6, 1.0 - 1e-9);
    x[pos++] = std::log(frac / (1.0 - frac));
    x[pos] = std::log(std::max(p.eta, 1e-8));
    return x;
  }

  double operator()(const Eigen::VectorXd& x) const {
    LatVarParams p;
    try {
      p = decode(x, model_);
      p.validate();
    } catch (const error&) {
      return kInf;
    }
    if (!std::isfinite(p.eta) || p.eta > 1e6) return kInf;

    const Eigen::Index n = data_.prev->cols();
    const LatVarParams params = p;
    Eigen::VectorXd phi(n), var(n);
    for (Eigen::Index c = 0; c < n; ++c) {
      phi[c] = coherence(c, params.zeta, params.eta, n);
      var[c] = 1.0 - phi[c] * phi[c];
    }
    double log_var_sum = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) log_var_sum += std::log(var[c]);

    double quad = 0.0;
    for (const Eigen::Index row : data_.rows) {
      const auto prev = data_.prev->row(row);
      const auto cur = data_.cur->row(row);
      for (Eigen::Index c = 0; c < n; ++c) {
        const double off = 0.5 * (1.0 - phi[c]);
        const double pred = phi[c] * prev[c] +
                            params.a * off * prev[(c - 1 + n) % n] +
                            params.b * off * prev[(c + 1) % n];
        const double r = cur[c] - pred;
        quad += r * r / var[c];
      }
    }
    const double n_rows = double(data_.rows.size());
    const double nll =
        0.5 * (quad + n_rows * log_var_sum + n_rows * double(n) * kLog2Pi);
    return std::isfinite(nll) ? nll : kInf;
  }

 private:
  const PairData& data_;
  LatModel model_;
};

struct BlockFit {
  LatVarParams params;
  double loglik = -kInf;
};

BlockFit fit_pair_block(const PairData& data, LatModel model,
                        const LatFitOptions& options) {
  // moment-style start: average lag-0 cross-correlation for zeta
  double num = 0.0, den_prev = 0.0, den_cur = 0.0;
  for (const Eigen::Index row : data.rows) {
    num += data.prev->row(row).dot(data.cur->row(row));
    den_prev += data.prev->row(row).squaredNorm();
    den_cur += data.cur->row(row).squaredNorm();
  }
  const double denom = std::sqrt(std::max(den_prev * den_cur, 1e-300));
  LatVarParams start;
  start.zeta = std::clamp(num / denom, 0.05, 0.9);
  start.eta = 0.5;

  OptimOptions opt;
  opt.max_evals = options.max_evals;
  opt.rel_ftol = options.rel_ftol;

  PairObjective diag_obj(data, LatModel::diagonal);
  const OptimResult diag_fit =
      minimize([&](const Eigen::VectorXd& x) { return diag_obj(x); },
               PairObjective::encode(start, LatModel::diagonal),
               Eigen::VectorXd::Constant(2, 0.4), opt);

  BlockFit out;
  if (model == LatModel::diagonal) {
    out.params = PairObjective::decode(diag_fit.x, LatModel::diagonal);
    out.loglik = -diag_fit.f;
    return out;
  }

  // full model seeded from the diagonal optimum
  LatVarParams lift = PairObjective::decode(diag_fit.x, LatModel::diagonal);
  PairObjective full_obj(data, LatModel::full);
  const OptimResult full_fit =
      minimize([&](const Eigen::VectorXd& x) { return full_obj(x); },
               PairObjective::encode(lift, LatModel::full),
               Eigen::VectorXd::Constant(4, 0.4), opt);
  if (-full_fit.f >= -diag_fit.f) {
    out.params = PairObjective::decode(full_fit.x, LatModel::full);
    out.loglik = -full_fit.f;
  } else {
    out.params = lift;
    out.loglik = -diag_fit.f;
  }
  return out;
}

}  // namespace

std::vector<LatFitResult> fit_lat(const std::vector<Eigen::MatrixXd>& coeff_stacks,
                                  Eigen::Index n_time, Eigen::Index n_real,
                                  LatModel model, int n_blocks,
                                  const LatFitOptions& options) {
  const auto n_bands = static_cast<Eigen::Index>(coeff_stacks.size());
  if (n_bands < 2)
    throw config_error("fit_lat: need at least two bands");
  if (n_blocks < 1) throw config_error("fit_lat: n_blocks must be >= 1");
  for (const auto& stack : coeff_stacks) {
    if (stack.rows() != n_time * n_real)
      throw config_error("fit_lat: stack rows must equal n_time * n_real");
    if (stack.cols() != coeff_stacks.front().cols())
      throw config_error("fit_lat: inconsistent coefficient length");
    if (!stack.array().isFinite().all())
      throw data_error("fit_lat: non-finite coefficient");
  }

  // balanced sequential time blocks
  std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;
  for (int blk = 0; blk < n_blocks; ++blk) {
    const Eigen::Index k0 = n_time * blk / n_blocks;
    const Eigen::Index k1 = n_time * (blk + 1) / n_blocks;
    if (k1 - k0 < options.min_block_length)
      throw config_error("fit_lat: time block shorter than " +
                         std::to_string(options.min_block_length) + " steps");
    blocks.emplace_back(k0, k1);
  }

  std::vector<LatFitResult> results(static_cast<std::size_t>(n_bands - 1));
  for (Eigen::Index m = 1; m < n_bands; ++m) {
    LatFitResult& res = results[static_cast<std::size_t>(m - 1)];
    double a_sum = 0.0, b_sum = 0.0, zeta_sum = 0.0, eta_sum = 0.0;
    for (const auto& [k0, k1] : blocks) {
      PairData data;
      data.prev = &coeff_stacks[static_cast<std::size_t>(m - 1)];
      data.cur = &coeff_stacks[static_cast<std::size_t>(m)];
      for (Eigen::Index r = 0; r < n_real; ++r)
        for (Eigen::Index k = k0; k < k1; ++k) data.rows.push_back(r * n_time + k);
      const BlockFit fit = fit_pair_block(data, model, options);
      res.per_block.push_back(fit.params);
      res.loglik += fit.loglik;
      a_sum += fit.params.a;
      b_sum += fit.params.b;
      zeta_sum += fit.params.zeta;
      eta_sum += fit.params.eta;
    }
    const double inv = 1.0 / double(blocks.size());
    res.averaged.a = a_sum * inv;
    res.averaged.b = b_sum * inv;
    res.averaged.zeta = zeta_sum * inv;
    res.averaged.eta = eta_sum * inv;
    res.averaged.validate();
  }
  return results;
}

}  // namespace swg
