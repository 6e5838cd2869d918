#include "bdglab/grid.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bdglab::grid {

namespace {
Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> f;
  return f;
}
}  // namespace

SpatialGrid SpatialGrid::make(double L, int n_x, double hbar) {
  if (L <= 0 || hbar <= 0) throw std::invalid_argument("grid: L and hbar must be positive");
  if (n_x < 8 || n_x > 4096 || n_x % 4 != 0)
    throw std::invalid_argument("grid: n_x must be divisible by 4 and in [8, 4096]");
  SpatialGrid g;
  g.L = L;
  g.n_x = n_x;
  g.hbar = hbar;
  g.dx = L / n_x;
  g.h = 2.0 * std::numbers::pi * hbar;
  g.x = VectorXd::LinSpaced(n_x, 0.0, (n_x - 1) * g.dx);
  g.p.resize(n_x);
  for (int i = 0; i < n_x; ++i)
    g.p[i] = hbar * (2.0 * std::numbers::pi / L) * g.k_of_index(i);
  return g;
}

int SpatialGrid::k_of_index(int idx) const {
  return idx < n_x / 2 ? idx : idx - n_x;
}

double SpatialGrid::p_max() const {
  return hbar * (2.0 * std::numbers::pi / L) * (n_x / 2);
}

VectorXcd raw_dft(const VectorXcd& v) {
  VectorXcd out(v.size());
  fft_engine().fwd(out, v);
  return out;
}

VectorXcd raw_idft_unscaled(const VectorXcd& v) {
  // unscaled inverse via conj(fwd(conj(v)))
  VectorXcd out(v.size());
  VectorXcd tmp = v.conjugate();
  fft_engine().fwd(out, tmp);
  return out.conjugate();
}

VectorXcd fourier_forward(const SpatialGrid& g, const VectorXcd& v) {
  return g.dx * raw_dft(v);
}

VectorXcd fourier_inverse(const SpatialGrid& g, const VectorXcd& vhat) {
  return raw_idft_unscaled(vhat) / (g.dx * g.n_x);
}

VectorXcd spectral_derivative(const SpatialGrid& g, const VectorXcd& v, int order) {
  if (order < 0) throw std::invalid_argument("spectral_derivative: order must be >= 0");
  VectorXcd vhat = raw_dft(v);
  const cplx two_pi_i_over_L(0.0, 2.0 * std::numbers::pi / g.L);
  for (int i = 0; i < g.n_x; ++i) {
    int k = g.k_of_index(i);
    if (k == -g.n_x / 2 && order % 2 == 1) {
      vhat[i] = 0.0;
      continue;
    }
    vhat[i] *= std::pow(two_pi_i_over_L * double(k), order);
  }
  return raw_idft_unscaled(vhat) / double(g.n_x);
}

void raw_dft_rows(MatrixXcd& m) {
  VectorXcd buf;
  for (int i = 0; i < m.rows(); ++i) {
    VectorXcd row = m.row(i).transpose();
    fft_engine().fwd(buf, row);
    m.row(i) = buf.transpose();
  }
}

void raw_idft_rows_unscaled(MatrixXcd& m) {
  for (int i = 0; i < m.rows(); ++i) {
    VectorXcd row = m.row(i).transpose();
    m.row(i) = raw_idft_unscaled(row).transpose();
  }
}

void raw_dft_cols(MatrixXcd& m) {
  VectorXcd buf;
  for (int j = 0; j < m.cols(); ++j) {
    VectorXcd col = m.col(j);
    fft_engine().fwd(buf, col);
    m.col(j) = buf;
  }
}

void raw_idft_cols_unscaled(MatrixXcd& m) {
  for (int j = 0; j < m.cols(); ++j) {
    VectorXcd col = m.col(j);
    m.col(j) = raw_idft_unscaled(col);
  }
}

PhaseGrid PhaseGrid::make(double L, int n_chi, double xi_max, int n_xi) {
  if (L <= 0 || xi_max <= 0) throw std::invalid_argument("phase grid: L and xi_max must be positive");
  if (n_chi < 4 || n_xi < 4) throw std::invalid_argument("phase grid: too few cells");
  if (n_xi % 2 != 0) throw std::invalid_argument("phase grid: n_xi must be even");
  PhaseGrid pg;
  pg.L = L;
  pg.n_chi = n_chi;
  pg.dchi = L / n_chi;
  pg.xi_max = xi_max;
  pg.n_xi = n_xi;
  pg.dxi = 2.0 * xi_max / n_xi;
  pg.chi = VectorXd::LinSpaced(n_chi, 0.0, (n_chi - 1) * pg.dchi);
  pg.xi.resize(n_xi);
  for (int j = 0; j < n_xi; ++j) pg.xi[j] = -xi_max + j * pg.dxi;
  return pg;
}

PhaseGrid PhaseGrid::induced(const SpatialGrid& sg) {
  const double dxi = sg.h / sg.L;
  const int n_xi = sg.n_x / 2;
  return make(sg.L, sg.n_x, dxi * (n_xi / 2), n_xi);
}

double boundary_mass(const PhaseGrid& pg, const Eigen::MatrixXd& f) {
  double m = 0.0;
  const int n = pg.n_xi;
  for (int j : {0, 1, n - 2, n - 1})
    m += f.col(j).cwiseAbs().sum();
  return m * pg.cell();
}

}  // namespace bdglab::grid
