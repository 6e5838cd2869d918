//==============================================================================
// interaction.hpp
// Even periodic pair interaction K and the mean-field objects built from it:
//   V_op = K * rho,  X_op(x,y) = K(x-y) op(x,y),  E = -grad V,
//   H_op = |p|^2/2 + mf_factor * V_op - h^d X_op.
// The spinless SU(2) reduction uses mf_factor = 2, plain fermions 1.
//==============================================================================
#pragma once

#include "bdglab/state.hpp"

namespace bdglab::interaction {

using grid::SpatialGrid;
using grid::cplx;
using state::DensityOperator;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

struct InteractionKernel {
  SpatialGrid grid;
  VectorXd values;      // K sampled at x_i (circulant generator)
  VectorXd grad;        // K' at x_i
  VectorXd khat;        // fourier_forward(values); Fourier coefficient c_k = khat_k / L
  MatrixXd circulant;   // K(x_i - x_j)
  double sup_norm = 0;      // ||K||_inf
  double grad_sup = 0;      // ||K'||_inf
  double lap_sup = 0;       // ||K''||_inf
  double fourier_l1 = 0;    // sum_k |c_k|
};

InteractionKernel make_gaussian(const SpatialGrid& g, double a, double sigma);
InteractionKernel make_cosine(const SpatialGrid& g, double a, int m);
InteractionKernel make_tabulated(const SpatialGrid& g, const VectorXd& values);

// rho(x_i) = h^d op(x_i, x_i), real nonnegative mass-1 density
VectorXd density(const DensityOperator& op);

// V = K * rho (periodic convolution)
VectorXd mean_field_potential(const InteractionKernel& K, const VectorXd& rho);
// X(x,y) = K(x-y) op(x,y)
MatrixXcd exchange_kernel(const InteractionKernel& K, const MatrixXcd& op_kernel);
// E = -dV/dx
VectorXd force_field(const InteractionKernel& K, const VectorXd& rho);

// kinetic circulant kernel of |p|^2/2 (dx-weighted operator convention)
MatrixXd kinetic_circulant(const SpatialGrid& g);

// H_op vec, with V and X built from op
VectorXcd hamiltonian_apply(const InteractionKernel& K, const DensityOperator& op,
                            const VectorXcd& vec, bool include_exchange = true,
                            double mf_factor = 1.0);
// dense kernel matrix of H_op
MatrixXcd hamiltonian_matrix(const InteractionKernel& K, const DensityOperator& op,
                             bool include_exchange = true, double mf_factor = 1.0);

}  // namespace bdglab::interaction
