//==============================================================================
// metrics.cpp
//==============================================================================
#include "bdglab/metrics.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace bdglab::metrics {

using grid::SpatialGrid;
using std::complex;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

VectorXd momentum_distribution(const DensityOperator& op) {
  const SpatialGrid& g = op.grid;
  MatrixXcd m = op.kernel;
  grid::raw_dft_cols(m);           // F * kernel
  grid::raw_idft_rows_unscaled(m); // ... * F^H
  const double w = g.h * g.dx * g.dx / g.L;
  return w * m.diagonal().real();
}

Moments quantum_moments(const DensityOperator& op) {
  const SpatialGrid& g = op.grid;
  Moments out;
  VectorXd m = momentum_distribution(op);
  for (int k = 0; k < g.n_x; ++k) {
    double p2 = g.p[k] * g.p[k];
    out.M2 += p2 * m[k];
    out.M4 += p2 * p2 * m[k];
  }

  VectorXd rho = g.h * op.kernel.diagonal().real();
  // circular mass center, then minimal-image distances about it
  complex<double> c(0, 0);
  for (int i = 0; i < g.n_x; ++i)
    c += rho[i] * std::polar(1.0, 2 * std::numbers::pi * g.x[i] / g.L);
  double center = std::abs(c) > 0 ? std::arg(c) * g.L / (2 * std::numbers::pi) : 0.0;
  for (int i = 0; i < g.n_x; ++i) {
    double d = g.x[i] - center;
    d -= g.L * std::round(d / g.L);
    out.N2 += d * d * rho[i] * g.dx;
    out.N4 += d * d * d * d * rho[i] * g.dx;
  }
  return out;
}

double schatten_norm(const DensityOperator& op, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("schatten_norm: need p >= 1");
  VectorXd ev = state::operator_spectrum(op.grid, op.kernel);
  if (std::isinf(p)) return ev.cwiseAbs().maxCoeff();
  double s = 0;
  for (int i = 0; i < ev.size(); ++i) s += std::pow(std::abs(ev[i]), p);
  return std::pow(op.grid.h, 1.0 / p) * std::pow(s, 1.0 / p);
}

namespace {

// angular frequency of mode k on an n-point axis of period P
double kappa(int k, int n, double P) {
  int kk = (k <= n / 2) ? k : k - n;
  return 2 * std::numbers::pi * kk / P;
}

void dft2_inplace(MatrixXcd& m) {
  grid::raw_dft_cols(m);
  grid::raw_dft_rows(m);
}

}  // namespace

double sobolev_negative_norm(const MatrixXd& g, double s, const PhaseGrid& pg) {
  if (s < 0) throw std::invalid_argument("sobolev_negative_norm: need s >= 0");
  if (g.rows() != pg.n_chi || g.cols() != pg.n_xi)
    throw std::invalid_argument("sobolev_negative_norm: grid size mismatch");
  MatrixXcd gh = g.cast<complex<double>>();
  dft2_inplace(gh);
  const double pxi = 2 * pg.xi_max;
  const double vol = pg.L * pxi;
  const double cell = pg.cell();
  double acc = 0;
  for (int l = 0; l < pg.n_xi; ++l) {
    double kx = kappa(l, pg.n_xi, pxi);
    for (int k = 0; k < pg.n_chi; ++k) {
      double kc = kappa(k, pg.n_chi, pg.L);
      acc += std::norm(gh(k, l)) * std::pow(1.0 + kc * kc + kx * kx, -s);
    }
  }
  return cell * std::sqrt(acc / vol);
}

double sobolev_negative_norm4(const VectorXd& g, double s, const PhaseGrid& pg) {
  if (s < 0) throw std::invalid_argument("sobolev_negative_norm4: need s >= 0");
  const int n = pg.n_chi, m = pg.n_xi;
  const long nz = static_cast<long>(n) * m;
  if (g.size() != nz * nz)
    throw std::invalid_argument("sobolev_negative_norm4: grid size mismatch");
  MatrixXcd gh = Eigen::Map<const MatrixXd>(g.data(), nz, nz).cast<complex<double>>();
  // 2-D transform of each column viewed as an (n, m) image, then of each row
  for (int pass = 0; pass < 2; ++pass) {
    for (long z = 0; z < nz; ++z) {
      Eigen::Map<MatrixXcd> img(gh.col(z).data(), n, m);
      MatrixXcd tmp = img;
      dft2_inplace(tmp);
      img = tmp;
    }
    gh.transposeInPlace();
  }
  const double pxi = 2 * pg.xi_max;
  const double vol = pg.L * pxi;
  const double cell = pg.cell();
  VectorXd wc(n), wx(m);
  for (int k = 0; k < n; ++k) wc[k] = kappa(k, n, pg.L);
  for (int l = 0; l < m; ++l) wx[l] = kappa(l, m, pxi);
  double acc = 0;
  for (long z2 = 0; z2 < nz; ++z2) {
    int k2 = static_cast<int>(z2 % n), l2 = static_cast<int>(z2 / n);
    double base = 1.0 + wc[k2] * wc[k2] + wx[l2] * wx[l2];
    for (long z1 = 0; z1 < nz; ++z1) {
      int k1 = static_cast<int>(z1 % n), l1 = static_cast<int>(z1 / n);
      acc += std::norm(gh(z1, z2)) *
             std::pow(base + wc[k1] * wc[k1] + wx[l1] * wx[l1], -s);
    }
  }
  return cell * cell * std::sqrt(acc) / vol;
}

}  // namespace bdglab::metrics
