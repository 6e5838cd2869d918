#include "bdglab/transforms.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bdglab::transforms {

using std::numbers::pi;

VectorXcd CoherentFamily::state(double chi, double xi) const {
  const auto& g = grid;
  VectorXcd v(g.n_x);
  for (int i = 0; i < g.n_x; ++i) {
    cplx acc = 0;
    for (int w = -1; w <= 1; ++w) {
      double u = g.x[i] + w * g.L - chi;
      acc += std::exp(-u * u / (2.0 * g.hbar)) *
             std::exp(cplx(0, xi * (g.x[i] + w * g.L) / g.hbar));
    }
    v[i] = acc;
  }
  v /= std::sqrt(g.dx) * v.norm();
  return v;
}

MatrixXd wigner_of_kernel(const SpatialGrid& g, const MatrixXcd& kernel, double* max_imag) {
  const int n = g.n_x;
  const int nt = n / 2;
  MatrixXd W(n, nt);
  double worst = 0;
  VectorXcd u(nt);
  for (int i = 0; i < n; ++i) {
    for (int mt = 0; mt < nt; ++mt) {
      int m = (mt < nt / 2) ? mt : mt - nt;
      int a = ((i + m) % n + n) % n;
      int b = ((i - m) % n + n) % n;
      u[mt] = 2.0 * g.dx * kernel(a, b);
    }
    VectorXcd what = grid::raw_dft(u);
    for (int j = 0; j < nt; ++j) {
      int k = j - nt / 2;
      cplx val = what[(k + nt) % nt];
      W(i, j) = val.real();
      worst = std::max(worst, std::abs(val.imag()));
    }
  }
  if (max_imag) *max_imag = worst;
  return W;
}

PhaseDensity wigner(const DensityOperator& op, double* max_imag) {
  PhaseDensity out;
  out.grid = grid::PhaseGrid::induced(op.grid);
  out.f = wigner_of_kernel(op.grid, op.kernel, max_imag);
  return out;
}

PhaseDensity husimi(const DensityOperator& op) {
  PhaseDensity W = wigner(op);
  const auto& pg = W.grid;
  const int nc = pg.n_chi, nx = pg.n_xi;
  MatrixXcd m = W.f.cast<cplx>();
  grid::raw_dft_cols(m);
  grid::raw_dft_rows(m);
  const double Lchi = pg.L;
  const double Lxi = 2.0 * pg.xi_max;
  const double hbar = op.grid.hbar;
  for (int i = 0; i < nc; ++i) {
    int kc = (i < nc / 2) ? i : i - nc;
    double wc = 2.0 * pi * kc / Lchi;
    for (int j = 0; j < nx; ++j) {
      int kx = (j < nx / 2) ? j : j - nx;
      double wx = 2.0 * pi * kx / Lxi;
      m(i, j) *= std::exp(-hbar * (wc * wc + wx * wx) / 4.0);
    }
  }
  grid::raw_idft_cols_unscaled(m);
  grid::raw_idft_rows_unscaled(m);
  W.f = m.real() / double(nc * nx);
  return W;
}

double husimi_point(const DensityOperator& op, double chi, double xi) {
  CoherentFamily fam(op.grid);
  VectorXcd gz = fam.state(chi, xi);
  cplx v = op.grid.dx * op.grid.dx * (gz.adjoint() * op.kernel * gz)(0, 0);
  return v.real();
}

DensityOperator antiwick_quantize(const SpatialGrid& g, double N, const PhaseDensity& f) {
  const auto pg = grid::PhaseGrid::induced(g);
  if (f.grid.n_chi != pg.n_chi || f.grid.n_xi != pg.n_xi ||
      std::abs(f.grid.dxi - pg.dxi) > 1e-12 || std::abs(f.grid.L - pg.L) > 1e-12)
    throw std::invalid_argument("antiwick: density must live on the induced phase grid");

  const int n = g.n_x;
  const int nz = pg.n_chi * pg.n_xi;
  CoherentFamily fam(g);
  MatrixXcd G(n, nz);
  VectorXd w(nz);
  double negmass = 0;
  for (int j = 0; j < pg.n_xi; ++j)
    for (int i = 0; i < pg.n_chi; ++i) {
      int z = i + pg.n_chi * j;
      G.col(z) = fam.state(pg.chi[i], pg.xi[j]);
      double fv = f.f(i, j);
      if (fv < 0) { negmass += -fv * pg.cell(); fv = 0; }
      w[z] = fv * pg.cell() / g.h;
    }
  if (negmass > 1e-10)
    throw std::invalid_argument("antiwick: density has negative mass beyond tolerance");

  MatrixXcd kernel = G * w.asDiagonal() * G.adjoint();
  kernel = state::hermitize(kernel);

  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(g.dx * kernel);
  VectorXd mu = es.eigenvalues();
  const double target = 1.0 / g.h;            // operator trace of a normalized state
  mu *= target / mu.sum();
  const double cap = 1.0 / (N * g.h);

  double moved = 0;
  for (int i = 0; i < n; ++i) moved += std::abs(mu[i] - std::clamp(mu[i], 0.0, cap));
  if (moved * g.h > 0.01)
    throw std::runtime_error("antiwick: quantization infeasible, clipping would move " +
                             std::to_string(100.0 * moved * g.h) + "% of mass");

  for (int iter = 0; iter < 32; ++iter) {
    for (int i = 0; i < n; ++i) mu[i] = std::clamp(mu[i], 0.0, cap);
    double deficit = target - mu.sum();
    if (std::abs(deficit) < 1e-14 * target) break;
    double interior = 0;
    for (int i = 0; i < n; ++i)
      if (mu[i] > 0 && mu[i] < cap * (1 - 1e-12)) interior += mu[i];
    if (interior <= 0)
      throw std::runtime_error("antiwick: no headroom to redistribute clipped mass");
    for (int i = 0; i < n; ++i)
      if (mu[i] > 0 && mu[i] < cap * (1 - 1e-12)) mu[i] += deficit * mu[i] / interior;
  }

  DensityOperator op;
  op.grid = g;
  op.N = N;
  MatrixXcd U = es.eigenvectors() / std::sqrt(g.dx);
  op.kernel = U * mu.asDiagonal() * U.adjoint();
  op.kernel = state::hermitize(op.kernel);
  return op;
}

TwoParticleDensity husimi_two_particle(const QuantumState& s, const PhaseGrid& target) {
  const auto& g = s.op.grid;
  double th = state::theta(s);
  if (th <= 0) throw std::invalid_argument("husimi_two_particle: requires theta > 0");
  MatrixXcd psi = s.alpha.kernel;
  double nrm = std::sqrt(th * s.op.N);  // ||alpha||_{L2}
  psi /= nrm;

  const int nz = target.n_chi * target.n_xi;
  CoherentFamily fam(g);
  MatrixXcd G(g.n_x, nz);
  for (int j = 0; j < target.n_xi; ++j)
    for (int i = 0; i < target.n_chi; ++i)
      G.col(i + target.n_chi * j) = fam.state(target.chi[i], target.xi[j]);

  MatrixXcd B = (g.dx * g.dx) * (G.adjoint() * psi * G.conjugate());

  TwoParticleDensity F;
  F.grid = target;
  F.F.resize((Eigen::Index)nz * nz);
  for (int z2 = 0; z2 < nz; ++z2)
    for (int z1 = 0; z1 < nz; ++z1)
      F.F[z1 + (Eigen::Index)nz * z2] = std::norm(B(z1, z2));
  double mass = F.mass();
  if (mass <= 0) throw std::runtime_error("husimi_two_particle: zero mass");
  F.F /= mass;
  return F;
}

namespace {
// spectral first derivative of each column of a real matrix along a periodic
// axis of physical length P (axis = rows)
MatrixXd spectral_ddx_rows(const MatrixXd& a, double P) {
  const int n = a.rows();
  MatrixXcd m = a.cast<cplx>();
  grid::raw_dft_cols(m);
  for (int i = 0; i < n; ++i) {
    int k = (i < n / 2) ? i : i - n;
    if (k == -n / 2) { m.row(i).setZero(); continue; }
    m.row(i) *= cplx(0, 2.0 * pi * k / P);
  }
  grid::raw_idft_cols_unscaled(m);
  return m.real() / double(n);
}
}  // namespace

double skew_information(const DensityOperator& op) {
  const auto& g = op.grid;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(g.dx * op.kernel);
  VectorXd mu = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  MatrixXcd U = es.eigenvectors() / std::sqrt(g.dx);
  MatrixXcd root = U * mu.asDiagonal() * U.adjoint();

  MatrixXd W = wigner_of_kernel(g, root);
  const auto pg = grid::PhaseGrid::induced(g);
  MatrixXd dchi = spectral_ddx_rows(W, pg.L);
  MatrixXd dxi = spectral_ddx_rows(W.transpose(), 2.0 * pg.xi_max).transpose();
  double d2 = (dchi.squaredNorm() + dxi.squaredNorm()) * pg.cell();
  return std::sqrt(d2);
}

}  // namespace bdglab::transforms
