#include <doctest.h>

#include "bdglab/metrics.hpp"
#include "bdglab/transforms.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

using namespace bdglab;
using std::numbers::pi;
using grid::cplx;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

grid::SpatialGrid g64() { return grid::SpatialGrid::make(1.0, 64, 1.0 / (32 * pi)); }

// normalized rank-one density operator built on a coherent state
state::DensityOperator coherent_projector(const grid::SpatialGrid& g, double N,
                                          double chi0, double xi0) {
  transforms::CoherentFamily fam(g);
  VectorXcd u = fam.state(chi0, xi0);
  state::DensityOperator op{g, N, (u * u.adjoint()) / g.h};
  return op;
}

// normalized mixture of two coherent projectors (rank two, strictly positive part)
state::DensityOperator two_state_mix(const grid::SpatialGrid& g, double N) {
  transforms::CoherentFamily fam(g);
  VectorXcd u = fam.state(0.30, 0.4);
  VectorXcd v = fam.state(0.72, -0.6);
  MatrixXcd k = (0.6 * u * u.adjoint() + 0.4 * v * v.adjoint()) / g.h;
  state::DensityOperator op{g, N, k};
  op.kernel /= op.scaled_trace();  // the two states are not exactly orthogonal
  return op;
}

}  // namespace

//------------------------------------------------------------------------------
// momentum distribution
//------------------------------------------------------------------------------

TEST_CASE("momentum distribution sums to the scaled trace") {
  auto g = g64();
  auto op = two_state_mix(g, 8);
  VectorXd m = metrics::momentum_distribution(op);
  REQUIRE(m.size() == g.n_x);
  CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.minCoeff() >= -1e-12);  // PSD operator: diagonal in any basis
}

TEST_CASE("momentum distribution of a plane-wave mixture sits on the programmed modes") {
  auto g = g64();
  // op = sum_k w_k |e_k><e_k| with plane waves e_k(x) = exp(2 pi i k x / L)/sqrt(L)
  const int modes[3] = {0, 3, -5};
  const double w[3] = {0.5, 0.3, 0.2};
  MatrixXcd kern = MatrixXcd::Zero(g.n_x, g.n_x);
  for (int t = 0; t < 3; ++t)
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_x; ++j)
        kern(i, j) += w[t] / (g.h * g.L) *
                      std::exp(cplx(0, 2 * pi * modes[t] * (g.x[i] - g.x[j]) / g.L));
  state::DensityOperator op{g, 4, kern};
  VectorXd m = metrics::momentum_distribution(op);
  for (int t = 0; t < 3; ++t) {
    int idx = modes[t] >= 0 ? modes[t] : modes[t] + g.n_x;  // FFT-order index
    CHECK(m[idx] == doctest::Approx(w[t]).epsilon(1e-12));
  }
  CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

//------------------------------------------------------------------------------
// moments
//------------------------------------------------------------------------------

TEST_CASE("coherent state moments match the Gaussian closed form") {
  auto g = g64();
  const double chi0 = 0.05, xi0 = 0.3;  // center near the wrap point on purpose
  auto op = coherent_projector(g, 1, chi0, xi0);
  auto mo = metrics::quantum_moments(op);
  const double s2 = g.hbar / 2;  // symmetric coherent widths in position and momentum
  CHECK(mo.M2 == doctest::Approx(xi0 * xi0 + s2).epsilon(1e-6));
  CHECK(mo.M4 ==
        doctest::Approx(std::pow(xi0, 4) + 6 * xi0 * xi0 * s2 + 3 * s2 * s2).epsilon(1e-6));
  CHECK(mo.N2 == doctest::Approx(s2).epsilon(1e-6));
  CHECK(mo.N4 == doctest::Approx(3 * s2 * s2).epsilon(1e-6));
}

TEST_CASE("position moments use the circular mass center across the wrap") {
  auto g = g64();
  // identical bumps at 0.95 and 0.35: a naive linear mean would misplace both
  auto near_wrap = coherent_projector(g, 1, 0.95, 0.0);
  auto interior = coherent_projector(g, 1, 0.35, 0.0);
  auto a = metrics::quantum_moments(near_wrap);
  auto b = metrics::quantum_moments(interior);
  CHECK(a.N2 == doctest::Approx(b.N2).epsilon(1e-8));
  CHECK(a.N4 == doctest::Approx(b.N4).epsilon(1e-8));
}

TEST_CASE("second moments obey the Cauchy-Schwarz bound M2 <= sqrt(M4)") {
  auto g = g64();
  auto mo1 = metrics::quantum_moments(two_state_mix(g, 8));
  CHECK(mo1.M2 <= std::sqrt(mo1.M4) * (1 + 1e-12));
  CHECK(mo1.N2 <= std::sqrt(mo1.N4) * (1 + 1e-12));
  auto mo2 = metrics::quantum_moments(coherent_projector(g, 1, 0.5, 0.8));
  CHECK(mo2.M2 <= std::sqrt(mo2.M4) * (1 + 1e-12));
}

//------------------------------------------------------------------------------
// Schatten norms
//------------------------------------------------------------------------------

TEST_CASE("Schatten L1 norm of a normalized positive operator is 1") {
  auto g = g64();
  CHECK(metrics::schatten_norm(coherent_projector(g, 1, 0.4, 0.2), 1.0) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(metrics::schatten_norm(two_state_mix(g, 8), 1.0) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("Schatten L2 norm agrees with the Frobenius route") {
  auto g = g64();
  auto op = two_state_mix(g, 8);
  const double frob =
      std::sqrt(g.h * g.dx * g.dx * op.kernel.array().abs2().sum());
  CHECK(metrics::schatten_norm(op, 2.0) == doctest::Approx(frob).epsilon(1e-10));
}

TEST_CASE("Schatten norms match an independent eigenvalue oracle at p = 3") {
  auto g = g64();
  auto op = two_state_mix(g, 8);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(g.dx * op.kernel);
  double acc = 0;
  for (int i = 0; i < g.n_x; ++i) acc += std::pow(std::abs(es.eigenvalues()[i]), 3.0);
  const double oracle = std::pow(g.h, 1.0 / 3.0) * std::pow(acc, 1.0 / 3.0);
  CHECK(metrics::schatten_norm(op, 3.0) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("Schatten infinity norm is the spectral radius, capped for rank one") {
  auto g = g64();
  auto op = coherent_projector(g, 1, 0.5, 0.0);
  const double inf_norm =
      metrics::schatten_norm(op, std::numeric_limits<double>::infinity());
  CHECK(inf_norm == doctest::Approx(1.0 / g.h).epsilon(1e-10));  // = 1/(N h), N = 1
  CHECK(inf_norm <= op.spectrum_cap() * (1 + 1e-10));
}

TEST_CASE("Schatten norm rejects p < 1") {
  auto g = g64();
  auto op = coherent_projector(g, 1, 0.5, 0.0);
  CHECK_THROWS_AS((void)metrics::schatten_norm(op, 0.5), std::invalid_argument);
}

TEST_CASE("pairing marginal obeys the interpolation cap h^{-1/p'}") {
  auto g = g64();
  transforms::CoherentFamily fam(g);
  VectorXcd u = fam.state(0.35, 0.3), v = fam.state(0.65, -0.3);
  state::QuantumState s;
  s.op = two_state_mix(g, 8);
  s.alpha.kernel = u * v.transpose() + v * u.transpose();
  s.alpha.symmetry = state::PairingSymmetry::symmetric;
  state::DensityOperator marg{g, 1, state::pairing_marginal(s)};
  CHECK(marg.scaled_trace() == doctest::Approx(1.0).epsilon(1e-10));
  for (double p : {2.0, 4.0}) {
    const double cap = std::pow(g.h, -(1.0 - 1.0 / p));
    CHECK(metrics::schatten_norm(marg, p) <= cap * (1 + 1e-10));
  }
}

//------------------------------------------------------------------------------
// negative Sobolev norms
//------------------------------------------------------------------------------

TEST_CASE("2-D negative Sobolev norm of a single cosine mode has a closed form") {
  auto pg = grid::PhaseGrid::make(2.0, 24, 1.5, 16);
  const double a = 0.7;
  const int k0 = 3;
  MatrixXd f(pg.n_chi, pg.n_xi);
  for (int i = 0; i < pg.n_chi; ++i)
    for (int j = 0; j < pg.n_xi; ++j)
      f(i, j) = a * std::cos(2 * pi * k0 * pg.chi[i] / pg.L);
  const double vol = pg.L * 2 * pg.xi_max;
  const double kap = 2 * pi * k0 / pg.L;
  for (double s : {0.0, 1.0, 6.0}) {
    const double expected = a * std::sqrt(vol / 2) * std::pow(1 + kap * kap, -s / 2);
    CHECK(metrics::sobolev_negative_norm(f, s, pg) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("s = 0 reduces to the cell-weighted L2 norm") {
  auto pg = grid::PhaseGrid::make(1.0, 12, 1.0, 8);
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  MatrixXd f(pg.n_chi, pg.n_xi);
  for (int i = 0; i < pg.n_chi; ++i)
    for (int j = 0; j < pg.n_xi; ++j) f(i, j) = nd(rng);
  const double l2 = std::sqrt(pg.cell() * f.array().square().sum());
  CHECK(metrics::sobolev_negative_norm(f, 0.0, pg) == doctest::Approx(l2).epsilon(1e-12));
  CHECK(metrics::sobolev_negative_norm(f, 1.0, pg) <= l2 * (1 + 1e-12));
  CHECK(metrics::sobolev_negative_norm(f, 6.0, pg) <=
        metrics::sobolev_negative_norm(f, 1.0, pg) * (1 + 1e-12));
}

TEST_CASE("4-D norm of a product density factorizes at s = 0") {
  auto pg = grid::PhaseGrid::make(1.0, 6, 1.0, 4);
  const long nz = static_cast<long>(pg.n_chi) * pg.n_xi;
  std::mt19937 rng(11);
  std::normal_distribution<double> nd;
  MatrixXd fa(pg.n_chi, pg.n_xi), fb(pg.n_chi, pg.n_xi);
  for (int i = 0; i < pg.n_chi; ++i)
    for (int j = 0; j < pg.n_xi; ++j) {
      fa(i, j) = nd(rng);
      fb(i, j) = nd(rng);
    }
  VectorXd f4(nz * nz);
  for (long z2 = 0; z2 < nz; ++z2)
    for (long z1 = 0; z1 < nz; ++z1)
      f4[z1 + nz * z2] = fa.data()[z1] * fb.data()[z2];
  const double lhs = metrics::sobolev_negative_norm4(f4, 0.0, pg);
  const double rhs = metrics::sobolev_negative_norm(fa, 0.0, pg) *
                     metrics::sobolev_negative_norm(fb, 0.0, pg);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("4-D norm of a single mode matches the closed form for all s") {
  auto pg = grid::PhaseGrid::make(1.0, 6, 1.0, 4);
  const long nz = static_cast<long>(pg.n_chi) * pg.n_xi;
  const double a = 1.3;
  const int k0 = 2;
  VectorXd f4(nz * nz);
  for (long z2 = 0; z2 < nz; ++z2)
    for (long z1 = 0; z1 < nz; ++z1) {
      const int i1 = static_cast<int>(z1 % pg.n_chi);
      f4[z1 + nz * z2] = a * std::cos(2 * pi * k0 * pg.chi[i1] / pg.L);
    }
  const double vol = pg.L * 2 * pg.xi_max;
  const double kap = 2 * pi * k0 / pg.L;
  for (double s : {0.0, 1.0}) {
    const double expected = a * vol * std::pow(1 + kap * kap, -s / 2) / std::sqrt(2.0);
    CHECK(metrics::sobolev_negative_norm4(f4, s, pg) ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("Sobolev norms validate their inputs") {
  auto pg = grid::PhaseGrid::make(1.0, 8, 1.0, 6);
  MatrixXd f = MatrixXd::Zero(pg.n_chi, pg.n_xi);
  CHECK(metrics::sobolev_negative_norm(f, 1.0, pg) == 0.0);
  CHECK_THROWS_AS((void)metrics::sobolev_negative_norm(f, -1.0, pg), std::invalid_argument);
  MatrixXd wrong = MatrixXd::Zero(pg.n_chi + 1, pg.n_xi);
  CHECK_THROWS_AS((void)metrics::sobolev_negative_norm(wrong, 1.0, pg),
                  std::invalid_argument);
  VectorXd f4 = VectorXd::Zero(10);
  CHECK_THROWS_AS((void)metrics::sobolev_negative_norm4(f4, 1.0, pg),
                  std::invalid_argument);
}
