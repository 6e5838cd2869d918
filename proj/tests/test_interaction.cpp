#include <doctest.h>

#include "bdglab/interaction.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace bdglab;
using std::numbers::pi;
using grid::cplx;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {
grid::SpatialGrid g64() { return grid::SpatialGrid::make(1.0, 64, 1.0 / (32 * pi)); }

VectorXd smooth_density(const grid::SpatialGrid& g) {
  VectorXd rho(g.n_x);
  for (int i = 0; i < g.n_x; ++i)
    rho[i] = 1.0 + 0.4 * std::cos(2 * pi * g.x[i] / g.L) - 0.25 * std::sin(6 * pi * g.x[i] / g.L);
  rho /= rho.sum() * g.dx;
  return rho;
}
}  // namespace

TEST_CASE("gaussian kernel: symmetry, sup norms, Fourier coefficients") {
  auto g = g64();
  double a = 0.5, sigma = 0.1;
  auto K = interaction::make_gaussian(g, a, sigma);

  for (int i = 1; i < g.n_x; ++i)
    CHECK(K.values[i] == doctest::Approx(K.values[g.n_x - i]).epsilon(1e-13));
  CHECK(K.sup_norm == doctest::Approx(a).epsilon(1e-9));
  CHECK(K.grad_sup == doctest::Approx(a * std::exp(-0.5) / sigma).epsilon(1e-9));

  // periodization (Poisson): exact coefficients are samples of the continuum
  // transform a*sqrt(2 pi)*sigma*exp(-sigma^2 w^2 / 2)
  for (int k = -5; k <= 5; ++k) {
    double w = 2 * pi * k / g.L;
    double exact = a * std::sqrt(2 * pi) * sigma * std::exp(-sigma * sigma * w * w / 2);
    int idx = (k + g.n_x) % g.n_x;
    CHECK(K.khat[idx] == doctest::Approx(exact).epsilon(1e-10));
  }
}

TEST_CASE("cosine kernel: analytic convolution and Fourier l1") {
  auto g = g64();
  double a = 0.3;
  int m = 3;
  auto K = interaction::make_cosine(g, a, m);
  CHECK(K.fourier_l1 == doctest::Approx(std::abs(a)).epsilon(1e-12));
  CHECK(K.sup_norm == doctest::Approx(std::abs(a)).epsilon(1e-12));

  VectorXd rho(g.n_x);
  for (int i = 0; i < g.n_x; ++i)
    rho[i] = (1.0 + std::cos(2 * pi * m * g.x[i] / g.L)) / g.L;
  VectorXd V = interaction::mean_field_potential(K, rho);
  for (int i = 0; i < g.n_x; ++i)
    CHECK(V[i] == doctest::Approx(0.5 * a * std::cos(2 * pi * m * g.x[i] / g.L)).epsilon(1e-11));
}

TEST_CASE("mean-field potential equals the direct circulant convolution") {
  auto g = g64();
  auto K = interaction::make_gaussian(g, 0.5, 0.1);
  VectorXd rho = smooth_density(g);
  VectorXd V = interaction::mean_field_potential(K, rho);
  VectorXd V_direct = g.dx * (K.circulant * rho);
  CHECK((V - V_direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("force field equals minus the convolution with the analytic gradient") {
  auto g = g64();
  auto K = interaction::make_gaussian(g, 0.5, 0.1);
  VectorXd rho = smooth_density(g);
  VectorXd E = interaction::force_field(K, rho);
  // oracle: E(x_i) = -dx * sum_j K'(x_i - x_j) rho(x_j), K' analytic
  Eigen::MatrixXd circ_grad(g.n_x, g.n_x);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_x; ++j)
      circ_grad(i, j) = K.grad[((i - j) % g.n_x + g.n_x) % g.n_x];
  VectorXd E_direct = -g.dx * (circ_grad * rho);
  CHECK((E - E_direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("hamiltonian: kinetic action on plane waves, free case") {
  auto g = g64();
  auto K = interaction::make_tabulated(g, VectorXd::Zero(g.n_x));
  state::DensityOperator op;
  op.grid = g;
  op.N = 16;
  op.kernel = MatrixXcd::Zero(g.n_x, g.n_x);

  for (int k : {0, 1, 5, -7, 31}) {
    VectorXcd v(g.n_x);
    for (int i = 0; i < g.n_x; ++i)
      v[i] = std::exp(cplx(0, 2 * pi * k * g.x[i] / g.L)) / std::sqrt(g.L);
    VectorXcd Hv = interaction::hamiltonian_apply(K, op, v);
    double pk = g.hbar * 2 * pi * k / g.L;
    CHECK((Hv - 0.5 * pk * pk * v).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("hamiltonian matrix is Hermitian and consistent with apply") {
  auto g = g64();
  auto K = interaction::make_gaussian(g, 0.5, 0.1);

  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  MatrixXcd A(g.n_x, g.n_x);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_x; ++j) A(i, j) = cplx(nd(rng), nd(rng));
  state::DensityOperator op;
  op.grid = g;
  op.N = 16;
  op.kernel = state::hermitize(A * A.adjoint());
  op.kernel /= op.scaled_trace();  // h Tr = 1

  MatrixXcd H = interaction::hamiltonian_matrix(K, op, true, 2.0);
  CHECK((H - H.adjoint()).cwiseAbs().maxCoeff() < 1e-11 * H.cwiseAbs().maxCoeff());

  VectorXcd v(g.n_x);
  for (int i = 0; i < g.n_x; ++i) v[i] = cplx(nd(rng), nd(rng));
  VectorXcd via_matrix = g.dx * (H * v);
  VectorXcd via_apply = interaction::hamiltonian_apply(K, op, v, true, 2.0);
  CHECK((via_matrix - via_apply).cwiseAbs().maxCoeff() < 1e-10 * via_apply.cwiseAbs().maxCoeff());
}

TEST_CASE("exchange kernel is the entrywise circulant product") {
  auto g = g64();
  auto K = interaction::make_gaussian(g, 0.5, 0.1);
  std::mt19937 rng(3);
  std::normal_distribution<double> nd;
  MatrixXcd A(g.n_x, g.n_x);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_x; ++j) A(i, j) = cplx(nd(rng), nd(rng));
  MatrixXcd X = interaction::exchange_kernel(K, A);
  for (int t = 0; t < 40; ++t) {
    int i = rng() % g.n_x, j = rng() % g.n_x;
    CHECK(std::abs(X(i, j) - K.circulant(i, j) * A(i, j)) < 1e-13);
  }
}

TEST_CASE("kernels must be even") {
  auto g = g64();
  VectorXd vals(g.n_x);
  for (int i = 0; i < g.n_x; ++i) vals[i] = std::sin(2 * pi * g.x[i] / g.L);
  CHECK_THROWS_AS((void)interaction::make_tabulated(g, vals), std::invalid_argument);
}
