#include "bdglab/interaction.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bdglab::interaction {

using std::numbers::pi;

namespace {

void finalize(InteractionKernel& K) {
  const auto& g = K.grid;
  const int n = g.n_x;
  // even symmetry K(x) = K(L - x) on the grid
  double scale = K.values.cwiseAbs().maxCoeff();
  if (scale == 0) scale = 1;
  for (int i = 1; i < n; ++i)
    if (std::abs(K.values[i] - K.values[n - i]) > 1e-12 * scale)
      throw std::invalid_argument("interaction: kernel must be even");

  VectorXcd vals = K.values.cast<cplx>();
  VectorXcd khat_c = grid::fourier_forward(g, vals);
  K.khat.resize(n);
  for (int i = 0; i < n; ++i) K.khat[i] = khat_c[i].real();
  K.fourier_l1 = khat_c.cwiseAbs().sum() / g.L;

  if (K.grad.size() == 0) {
    VectorXcd d1 = grid::spectral_derivative(g, vals, 1);
    K.grad.resize(n);
    for (int i = 0; i < n; ++i) K.grad[i] = d1[i].real();
  }
  VectorXcd d2 = grid::spectral_derivative(g, vals, 2);

  // sup norms on a 4x Fourier-refined evaluation
  const int nr = 4 * n;
  double s0 = 0, s1 = 0, s2 = 0;
  for (int i = 0; i < nr; ++i) {
    double x = i * g.L / nr;
    cplx v0 = 0, v1 = 0, v2 = 0;
    for (int k = 0; k < n; ++k) {
      int kk = g.k_of_index(k);
      cplx c = khat_c[k] / g.L;
      cplx ph = std::exp(cplx(0, 2.0 * pi * kk * x / g.L));
      cplx iw = cplx(0, 2.0 * pi * kk / g.L);
      v0 += c * ph;
      v1 += c * iw * ph;
      v2 += c * iw * iw * ph;
    }
    s0 = std::max(s0, std::abs(v0));
    s1 = std::max(s1, std::abs(v1));
    s2 = std::max(s2, std::abs(v2));
  }
  if (K.sup_norm == 0) K.sup_norm = s0;
  if (K.grad_sup == 0) K.grad_sup = s1;
  K.lap_sup = s2;
  (void)d2;

  K.circulant.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      K.circulant(i, j) = K.values[(i - j + n) % n];
}

}  // namespace

InteractionKernel make_gaussian(const SpatialGrid& g, double a, double sigma) {
  if (sigma <= 0) throw std::invalid_argument("interaction: sigma must be positive");
  InteractionKernel K;
  K.grid = g;
  K.values.resize(g.n_x);
  K.grad.resize(g.n_x);
  const int W = std::max(2, (int)std::ceil(9.0 * sigma / g.L) + 1);
  for (int i = 0; i < g.n_x; ++i) {
    double v = 0, dv = 0;
    for (int w = -W; w <= W; ++w) {
      double u = g.x[i] + w * g.L;
      double e = std::exp(-u * u / (2.0 * sigma * sigma));
      v += a * e;
      dv += -a * u / (sigma * sigma) * e;
    }
    K.values[i] = v;
    K.grad[i] = dv;
  }
  K.sup_norm = std::abs(a);  // attained at x = 0 (image corrections included below if larger)
  K.sup_norm = std::max(K.sup_norm, K.values.cwiseAbs().maxCoeff());
  K.grad_sup = std::abs(a) * std::exp(-0.5) / sigma;
  finalize(K);
  return K;
}

InteractionKernel make_cosine(const SpatialGrid& g, double a, int m) {
  if (m < 0 || m >= g.n_x / 2) throw std::invalid_argument("interaction: cosine mode out of range");
  InteractionKernel K;
  K.grid = g;
  K.values.resize(g.n_x);
  K.grad.resize(g.n_x);
  const double w = 2.0 * pi * m / g.L;
  for (int i = 0; i < g.n_x; ++i) {
    K.values[i] = a * std::cos(w * g.x[i]);
    K.grad[i] = -a * w * std::sin(w * g.x[i]);
  }
  K.sup_norm = std::abs(a);
  K.grad_sup = std::abs(a) * w;
  finalize(K);
  return K;
}

InteractionKernel make_tabulated(const SpatialGrid& g, const VectorXd& values) {
  if (values.size() != g.n_x) throw std::invalid_argument("interaction: tabulated size mismatch");
  InteractionKernel K;
  K.grid = g;
  K.values = values;
  finalize(K);
  return K;
}

VectorXd density(const DensityOperator& op) {
  const int n = op.grid.n_x;
  VectorXd rho(n);
  for (int i = 0; i < n; ++i) rho[i] = op.grid.h * op.kernel(i, i).real();
  return rho;
}

VectorXd mean_field_potential(const InteractionKernel& K, const VectorXd& rho) {
  const auto& g = K.grid;
  VectorXcd rhohat = grid::fourier_forward(g, rho.cast<cplx>());
  for (int i = 0; i < g.n_x; ++i) rhohat[i] *= K.khat[i];
  VectorXcd v = grid::fourier_inverse(g, rhohat);
  VectorXd out(g.n_x);
  for (int i = 0; i < g.n_x; ++i) out[i] = v[i].real();
  return out;
}

MatrixXcd exchange_kernel(const InteractionKernel& K, const MatrixXcd& op_kernel) {
  return K.circulant.cast<cplx>().cwiseProduct(op_kernel);
}

VectorXd force_field(const InteractionKernel& K, const VectorXd& rho) {
  const auto& g = K.grid;
  VectorXd v = mean_field_potential(K, rho);
  VectorXcd dv = grid::spectral_derivative(g, v.cast<cplx>(), 1);
  VectorXd out(g.n_x);
  for (int i = 0; i < g.n_x; ++i) out[i] = -dv[i].real();
  return out;
}

MatrixXd kinetic_circulant(const SpatialGrid& g) {
  const int n = g.n_x;
  VectorXcd coef(n);
  for (int i = 0; i < n; ++i) coef[i] = 0.5 * g.p[i] * g.p[i];
  VectorXcd row = grid::fourier_inverse(g, coef);
  MatrixXd T(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      T(i, j) = row[(i - j + n) % n].real();
  return T;
}

VectorXcd hamiltonian_apply(const InteractionKernel& K, const DensityOperator& op,
                            const VectorXcd& vec, bool include_exchange, double mf_factor) {
  const auto& g = op.grid;
  VectorXcd vhat = grid::raw_dft(vec);
  for (int i = 0; i < g.n_x; ++i) vhat[i] *= 0.5 * g.p[i] * g.p[i];
  VectorXcd out = grid::raw_idft_unscaled(vhat) / double(g.n_x);

  VectorXd V = mean_field_potential(K, density(op));
  for (int i = 0; i < g.n_x; ++i) out[i] += mf_factor * V[i] * vec[i];

  if (include_exchange) {
    MatrixXcd X = exchange_kernel(K, op.kernel);
    out -= g.h * g.dx * (X * vec);
  }
  return out;
}

MatrixXcd hamiltonian_matrix(const InteractionKernel& K, const DensityOperator& op,
                             bool include_exchange, double mf_factor) {
  const auto& g = op.grid;
  MatrixXcd H = kinetic_circulant(g).cast<cplx>();
  VectorXd V = mean_field_potential(K, density(op));
  for (int i = 0; i < g.n_x; ++i) H(i, i) += mf_factor * V[i] / g.dx;
  if (include_exchange) H -= g.h * exchange_kernel(K, op.kernel);
  return H;
}

}  // namespace bdglab::interaction
