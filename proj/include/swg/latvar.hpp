#pragma once

#include <Eigen/Core>
#include <complex>
#include <vector>

#include "swg/errors.hpp"

namespace swg {

// Band-to-band coupling of the spectral coefficients: a circular tridiagonal
// VAR(1) across wavenumbers with coherence-weighted diagonal.
struct LatVarParams {
  double a = 0.0;     // sub-diagonal coupling, |a| < 1
  double b = 0.0;     // super-diagonal coupling, |b| < 1
  double zeta = 0.0;  // coherence scale, in [0, 1]
  double eta = 1.0;   // coherence decay, > 0

  void validate() const;
};

enum class LatModel { full, diagonal };  // FULL / ARL

// zeta * (1 + 4 sin^2(c pi / N))^(-eta); the zeta scale is clamped just below
// one so the transition stays strictly stable.
double coherence(Eigen::Index c, double zeta, double eta, Eigen::Index n);
Eigen::VectorXd coherence_vector(const LatVarParams& params, Eigen::Index n);

// Dense form of the circular tridiagonal transition matrix: diagonal
// coherence(c), sub-diagonal a*(1-coherence(c))/2, super-diagonal
// b*(1-coherence(c))/2. Every row satisfies |diag| + |off| < 1.
Eigen::MatrixXd build_transition(const LatVarParams& params, Eigen::Index n);

// Innovation variances diag(1 - coherence(c)^2), all in (0, 1].
Eigen::VectorXd innovation_variances(const LatVarParams& params, Eigen::Index n);

// Hermitian packing of complex spectral coefficients into N real numbers:
// slot 0 = coeff(0) (real), slot c = sqrt(2) Re coeff(c) and slot N-c =
// sqrt(2) Im coeff(c) for 0 < c < N/2, slot N/2 = coeff(N/2) (real, N even).
Eigen::VectorXd pack_hermitian(const Eigen::VectorXcd& coeffs);
Eigen::VectorXcd unpack_hermitian(const Eigen::VectorXd& packed);

// One VAR step on packed coefficients: out = P * prev + innovation, with the
// banded multiply done in O(N). Operating in the packed real representation
// preserves Hermitian symmetry by construction.
Eigen::VectorXd propagate(const Eigen::VectorXd& packed_prev,
                          const LatVarParams& params,
                          const Eigen::VectorXd& packed_innovation);
// Convenience overload on complex coefficients; validates the symmetry of
// both inputs.
Eigen::VectorXcd propagate(const Eigen::VectorXcd& prev, const LatVarParams& params,
                           const Eigen::VectorXcd& innovation);

struct LatFitOptions {
  int max_evals = 1200;
  double rel_ftol = 1e-9;
  int min_block_length = 12;
};

struct LatFitResult {
  LatVarParams averaged;
  std::vector<LatVarParams> per_block;
  double loglik = 0.0;  // summed over blocks at the per-block optima
};

// Fits the coupling for bands 1..M-1 (band m conditioned on band m-1).
// `coeff_stacks[m]` holds the packed coefficients of band m, one row per
// (realization, time) pair laid out r-major; the time axis is split into
// n_blocks sequential blocks, each block fit separately, estimates averaged.
// The diagonal model pins a = b = 0; the full model is seeded from it so the
// total log-likelihood never falls below it.
std::vector<LatFitResult> fit_lat(const std::vector<Eigen::MatrixXd>& coeff_stacks,
                                  Eigen::Index n_time, Eigen::Index n_real,
                                  LatModel model, int n_blocks,
                                  const LatFitOptions& options = {});

}  // namespace swg
