//==============================================================================
// transforms.hpp
// Quantum <-> phase-space bridges on the Wigner-induced grid:
//   wigner    f_op(chi, xi) = sum over even displacements y = 2m dx in [-L/2, L/2)
//   husimi    g_h * f_op (Gaussian phase-space smoothing, width sqrt(hbar))
//   antiwick  op = (1/h^d) sum_z f(z) |g_z><g_z| cell, clipped to [0, 1/(N h^d)]
//   husimi_two_particle  |<g_z1 (x) g_z2, alpha/||alpha||>|^2 on a coarse grid
//   skew_information     || grad f_sqrt(op) ||_{L2}
// Coherent states are 3-image periodized Gaussians, numerically normalized.
//==============================================================================
#pragma once

#include "bdglab/kinetic.hpp"
#include "bdglab/state.hpp"

namespace bdglab::transforms {

using grid::PhaseGrid;
using grid::SpatialGrid;
using grid::cplx;
using kinetic::PhaseDensity;
using kinetic::TwoParticleDensity;
using state::DensityOperator;
using state::QuantumState;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

struct CoherentFamily {
  SpatialGrid grid;
  explicit CoherentFamily(const SpatialGrid& g) : grid(g) {}
  // normalized wrapped coherent state centered at (chi, xi)
  VectorXcd state(double chi, double xi) const;
};

// Wigner transform of a Hermitian kernel on PhaseGrid::induced(grid).
// max_imag (if given) receives the largest imaginary part encountered,
// a locality diagnostic: it is bounded by the kernel mass at separation L/2.
PhaseDensity wigner(const DensityOperator& op, double* max_imag = nullptr);
// Wigner of an arbitrary Hermitian kernel matrix (used for sqrt(op))
MatrixXd wigner_of_kernel(const SpatialGrid& g, const MatrixXcd& kernel, double* max_imag = nullptr);

PhaseDensity husimi(const DensityOperator& op);
// pointwise Husimi value <g_z, op g_z> (cross-validation route)
double husimi_point(const DensityOperator& op, double chi, double xi);

// anti-Wick quantization of a normalized density on PhaseGrid::induced(g).
// Throws if spectral clipping to [0, 1/(N h)] would move more than 1% mass.
DensityOperator antiwick_quantize(const SpatialGrid& g, double N, const PhaseDensity& f);

// normalized two-particle Husimi of the pairing wave function on `target`
TwoParticleDensity husimi_two_particle(const QuantumState& s, const PhaseGrid& target);

// D_op = || grad_z f_sqrt(op) ||_{L2} over phase space
double skew_information(const DensityOperator& op);

}  // namespace bdglab::transforms
