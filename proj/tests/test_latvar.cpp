#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "swg/errors.hpp"
#include "swg/latvar.hpp"
#include "swg/rng.hpp"

using namespace swg;

namespace {

// Simulates packed coefficient stacks for a two-band system: band 0 drawn
// stationary N(0, I), band 1 propagated with the given parameters.
std::vector<Eigen::MatrixXd> two_band_stacks(const LatVarParams& truth,
                                             Eigen::Index n, Eigen::Index n_time,
                                             Eigen::Index n_real,
                                             std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> stacks(2, Eigen::MatrixXd(n_time * n_real, n));
  const Eigen::VectorXd var = innovation_variances(truth, n);
  const Eigen::VectorXd sd = var.cwiseSqrt();
  CounterRng rng(seed, 31);
  for (Eigen::Index r = 0; r < n_real; ++r) {
    for (Eigen::Index k = 0; k < n_time; ++k) {
      const Eigen::VectorXd u0 = rng.normals(n);
      const Eigen::VectorXd e = sd.cwiseProduct(rng.normals(n));
      stacks[0].row(r * n_time + k) = u0.transpose();
      stacks[1].row(r * n_time + k) = propagate(u0, truth, e).transpose();
    }
  }
  return stacks;
}

}  // namespace

TEST_CASE("coherence spot values") {
  CHECK(coherence(0, 0.8, 1.7, 32) == doctest::Approx(0.8).epsilon(1e-15));
  for (Eigen::Index c = 0; c < 16; ++c) CHECK(coherence(c, 0.0, 1.0, 16) == 0.0);
  CHECK(coherence(16, 0.8, 1.0, 32) == doctest::Approx(0.16).epsilon(1e-15));
  // decreasing in sin^2(c pi / N) up to the Nyquist index
  for (Eigen::Index c = 1; c <= 16; ++c)
    CHECK(coherence(c, 0.9, 0.8, 32) < coherence(c - 1, 0.9, 0.8, 32));
}

TEST_CASE("build_transition structure and stability") {
  SUBCASE("a = b = 0 is exactly diagonal") {
    LatVarParams p;
    p.zeta = 0.7;
    p.eta = 0.9;
    const Eigen::MatrixXd t = build_transition(p, 12);
    for (Eigen::Index i = 0; i < 12; ++i)
      for (Eigen::Index j = 0; j < 12; ++j)
        if (i != j)
          CHECK(t(i, j) == 0.0);
        else
          CHECK(t(i, i) == doctest::Approx(coherence(i, 0.7, 0.9, 12)).epsilon(1e-15));
  }

  SUBCASE("row bound |diag| + |off| < 1 over 1000 random draws") {
    CounterRng rng(14, 2);
    for (int trial = 0; trial < 1000; ++trial) {
      LatVarParams p;
      p.a = 1.98 * rng.next_uniform() - 0.99;
      p.b = 1.98 * rng.next_uniform() - 0.99;
      p.zeta = rng.next_uniform();
      p.eta = 0.05 + 3.0 * rng.next_uniform();
      const Eigen::MatrixXd t = build_transition(p, 24);
      for (Eigen::Index i = 0; i < 24; ++i) {
        const double row_sum = t.row(i).cwiseAbs().sum();
        CHECK(row_sum < 1.0);
      }
    }
  }

  SUBCASE("zeta at the boundary is clamped below one") {
    LatVarParams p;
    p.zeta = 1.0;
    p.eta = 1e-9;
    const Eigen::MatrixXd t = build_transition(p, 8);
    CHECK(t(0, 0) < 1.0);
    CHECK(t(0, 0) == doctest::Approx(1.0 - 1e-6).epsilon(1e-9));
  }
}

TEST_CASE("innovation_variances") {
  LatVarParams p;
  p.zeta = 0.0;
  p.eta = 1.0;
  CHECK((innovation_variances(p, 10).array() == 1.0).all());
  p.zeta = 0.8;
  CHECK(innovation_variances(p, 10)[0] == doctest::Approx(0.36).epsilon(1e-15));
  p.zeta = 1.0;  // clamped inside
  CHECK((innovation_variances(p, 10).array() > 0.0).all());
}

TEST_CASE("hermitian pack/unpack round trip") {
  for (Eigen::Index n : {1, 2, 5, 8, 9}) {
    CounterRng rng(33, Eigen::Index(n));
    Eigen::VectorXd packed = rng.normals(n);
    const Eigen::VectorXcd coeffs = unpack_hermitian(packed);
    // symmetry by construction
    for (Eigen::Index c = 1; c < n; ++c)
      CHECK(std::abs(coeffs[c] - std::conj(coeffs[n - c])) <= 1e-14);
    const Eigen::VectorXd back = pack_hermitian(coeffs);
    CHECK((back - packed).cwiseAbs().maxCoeff() <= 1e-14);
  }

  Eigen::VectorXcd broken(4);
  broken << std::complex<double>(1.0, 0.0), std::complex<double>(1.0, 1.0),
      std::complex<double>(0.5, 0.0), std::complex<double>(1.0, 1.0);
  CHECK_THROWS_AS(pack_hermitian(broken), data_error);
}

TEST_CASE("propagate") {
  const Eigen::Index n = 16;
  LatVarParams p;
  p.a = 0.3;
  p.b = -0.2;
  p.zeta = 0.6;
  p.eta = 0.7;

  SUBCASE("zero input and zero innovation give zero output") {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd out = propagate(zero, p, zero);
    CHECK(out.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("a = b = 0 equals the scalar recursion exactly") {
    LatVarParams diag = p;
    diag.a = 0.0;
    diag.b = 0.0;
    CounterRng rng(8, 3);
    Eigen::VectorXd u = rng.normals(n);
    Eigen::VectorXd scalar = u;
    for (int step = 0; step < 5; ++step) {
      const Eigen::VectorXd e = rng.normals(n);
      u = propagate(u, diag, e);
      for (Eigen::Index c = 0; c < n; ++c)
        scalar[c] = coherence(c, diag.zeta, diag.eta, n) * scalar[c] + e[c];
      CHECK((u - scalar).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  SUBCASE("matches the dense transition matrix") {
    CounterRng rng(9, 3);
    const Eigen::VectorXd u = rng.normals(n);
    const Eigen::VectorXd e = rng.normals(n);
    const Eigen::MatrixXd t = build_transition(p, n);
    const Eigen::VectorXd expect = t * u + e;
    CHECK((propagate(u, p, e) - expect).cwiseAbs().maxCoeff() <= 1e-13);
  }

  SUBCASE("complex overload preserves Hermitian symmetry") {
    CounterRng rng(10, 3);
    const Eigen::VectorXcd prev = unpack_hermitian(rng.normals(n));
    const Eigen::VectorXcd innov = unpack_hermitian(rng.normals(n));
    const Eigen::VectorXcd out = propagate(prev, p, innov);
    for (Eigen::Index c = 1; c < n; ++c)
      CHECK(std::abs(out[c] - std::conj(out[n - c])) <= 1e-12);
    // agrees with the packed path
    const Eigen::VectorXd packed =
        propagate(pack_hermitian(prev), p, pack_hermitian(innov));
    CHECK((pack_hermitian(out) - packed).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("diagonal chain keeps unit variance") {
    LatVarParams diag;
    diag.zeta = 0.7;
    diag.eta = 0.5;
    const Eigen::VectorXd sd = innovation_variances(diag, n).cwiseSqrt();
    CounterRng rng(11, 3);
    const int chains = 4000;
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(n);
    for (int chain = 0; chain < chains; ++chain) {
      Eigen::VectorXd u = rng.normals(n);  // stationary start
      for (int step = 0; step < 4; ++step)
        u = propagate(u, diag, sd.cwiseProduct(rng.normals(n)));
      acc += u.array().square();
    }
    const Eigen::ArrayXd var = acc / double(chains);
    const double band = 3.0 * std::sqrt(2.0 / double(chains));
    CHECK((var - 1.0).abs().maxCoeff() <= band * 1.6);  // max over 16 wavenumbers
  }
}

TEST_CASE("fit_lat guards") {
  std::vector<Eigen::MatrixXd> stacks(2, Eigen::MatrixXd::Zero(40, 8));
  CHECK_THROWS_AS(fit_lat(stacks, 40, 1, LatModel::full, 5), config_error);
  CHECK_THROWS_AS(fit_lat({stacks[0]}, 40, 1, LatModel::full, 1), config_error);
  CHECK_THROWS_AS(fit_lat(stacks, 39, 1, LatModel::full, 1), config_error);
}

TEST_CASE("fit_lat single block equals its own average and recovers truth") {
  LatVarParams truth;
  truth.a = 0.2;
  truth.b = -0.1;
  truth.zeta = 0.7;
  truth.eta = 0.5;
  const Eigen::Index n = 16;
  const auto stacks = two_band_stacks(truth, n, 700, 2, 77);

  const auto res1 = fit_lat(stacks, 700, 2, LatModel::full, 1);
  REQUIRE(res1.size() == 1);
  CHECK(res1[0].per_block.size() == 1);
  CHECK(res1[0].averaged.a == res1[0].per_block[0].a);
  CHECK(res1[0].averaged.b == res1[0].per_block[0].b);
  CHECK(res1[0].averaged.zeta == res1[0].per_block[0].zeta);
  CHECK(res1[0].averaged.eta == res1[0].per_block[0].eta);

  // generous single-draw bands; calibrated bands live in the acceptance suite
  CHECK(std::abs(res1[0].averaged.a - truth.a) < 0.1);
  CHECK(std::abs(res1[0].averaged.b - truth.b) < 0.1);
  CHECK(std::abs(res1[0].averaged.zeta - truth.zeta) < 0.08);
  CHECK(std::abs(res1[0].averaged.eta - truth.eta) < 0.15);

  // block averaging stays close to the whole-sample fit
  const auto res5 = fit_lat(stacks, 700, 2, LatModel::full, 5);
  CHECK(res5[0].per_block.size() == 5);
  CHECK(std::abs(res5[0].averaged.zeta - res1[0].averaged.zeta) < 0.1);
}

TEST_CASE("fit_lat nesting: full never falls below diagonal") {
  LatVarParams truth;
  truth.a = 0.25;
  truth.b = 0.1;
  truth.zeta = 0.6;
  truth.eta = 0.4;
  const auto stacks = two_band_stacks(truth, 12, 260, 1, 78);
  const auto full = fit_lat(stacks, 260, 1, LatModel::full, 2);
  const auto diag = fit_lat(stacks, 260, 1, LatModel::diagonal, 2);
  CHECK(full[0].loglik >= diag[0].loglik);
  CHECK(diag[0].averaged.a == 0.0);
  CHECK(diag[0].averaged.b == 0.0);
}

TEST_CASE("fit_lat diagonal recovery keeps a and b near zero") {
  LatVarParams truth;
  truth.zeta = 0.65;
  truth.eta = 0.6;  // a = b = 0
  const auto stacks = two_band_stacks(truth, 16, 600, 1, 79);
  const auto full = fit_lat(stacks, 600, 1, LatModel::full, 1);
  CHECK(std::abs(full[0].averaged.a) < 0.08);
  CHECK(std::abs(full[0].averaged.b) < 0.08);
}

TEST_CASE("fit_lat estimator error shrinks with sample size") {
  LatVarParams truth;
  truth.a = 0.2;
  truth.b = -0.1;
  truth.zeta = 0.7;
  truth.eta = 0.5;
  const Eigen::Index n = 12;
  const int reps = 10;
  std::vector<double> err_small, err_large;
  for (int rep = 0; rep < reps; ++rep) {
    for (const Eigen::Index n_time : {Eigen::Index(285), Eigen::Index(1140)}) {
      const auto stacks = two_band_stacks(truth, n, n_time, 1, 800 + rep);
      const auto fit = fit_lat(stacks, n_time, 1, LatModel::full, 1);
      const double err = std::abs(fit[0].averaged.zeta - truth.zeta) +
                         std::abs(fit[0].averaged.eta - truth.eta);
      (n_time == 285 ? err_small : err_large).push_back(err);
    }
  }
  std::sort(err_small.begin(), err_small.end());
  std::sort(err_large.begin(), err_large.end());
  CHECK(err_large[reps / 2] < err_small[reps / 2]);
}
