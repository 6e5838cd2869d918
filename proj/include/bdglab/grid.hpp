//==============================================================================
// grid.hpp
// Periodic spatial grid, phase-space grid, and the fixed Fourier convention
// used everywhere else:
//   ghat_k = dx * sum_i g(x_i) e^{-2 pi i k x_i / L},  k in {-n/2 .. n/2-1}
//   g(x_i) = (1/L) * sum_k ghat_k e^{+2 pi i k x_i / L}
// Coefficients are stored in FFT order (k = 0..n/2-1, -n/2..-1).
//==============================================================================
#pragma once

#include <Eigen/Dense>
#include <complex>

namespace bdglab::grid {

using cplx = std::complex<double>;
using Eigen::VectorXd;
using Eigen::VectorXcd;
using Eigen::MatrixXcd;

struct SpatialGrid {
  double L = 0;
  int n_x = 0;
  double hbar = 0;
  double dx = 0;   // L / n_x
  double h = 0;    // 2*pi*hbar
  VectorXd x;      // x_i = i*dx
  VectorXd p;      // FFT order, p_k = hbar*(2*pi/L)*k

  static SpatialGrid make(double L, int n_x, double hbar);
  // signed wavenumber k for FFT-order index (0..n/2-1, then -n/2..-1)
  int k_of_index(int idx) const;
  double p_max() const;  // max |p_k| = hbar*(2*pi/L)*(n_x/2)
};

// raw DFTs, no scaling (inverse is NOT divided by n)
VectorXcd raw_dft(const VectorXcd& v);
VectorXcd raw_idft_unscaled(const VectorXcd& v);

VectorXcd fourier_forward(const SpatialGrid& g, const VectorXcd& v);
VectorXcd fourier_inverse(const SpatialGrid& g, const VectorXcd& vhat);
// multiplies ghat_k by (2*pi*i*k/L)^order; Nyquist mode zeroed for odd order
VectorXcd spectral_derivative(const SpatialGrid& g, const VectorXcd& v, int order);

// in-place raw DFT along each row / column of a kernel matrix
void raw_dft_rows(MatrixXcd& m);
void raw_idft_rows_unscaled(MatrixXcd& m);
void raw_dft_cols(MatrixXcd& m);
void raw_idft_cols_unscaled(MatrixXcd& m);

struct PhaseGrid {
  double L = 0;
  int n_chi = 0;
  double dchi = 0;
  double xi_max = 0;  // xi_j = -xi_max + j*dxi, j = 0..n_xi-1
  int n_xi = 0;
  double dxi = 0;
  VectorXd chi, xi;

  static constexpr double tol_boundary = 1e-10;

  static PhaseGrid make(double L, int n_chi, double xi_max, int n_xi);
  // grid induced by the discrete Wigner transform of sg:
  // n_chi = n_x, dxi = 2*pi*hbar/L = h/L, n_xi = n_x/2
  static PhaseGrid induced(const SpatialGrid& sg);
  double cell() const { return dchi * dxi; }
};

// mass within 2 cells of +-xi_max (admission guard for transport)
double boundary_mass(const PhaseGrid& pg, const Eigen::MatrixXd& f);

}  // namespace bdglab::grid
