//==============================================================================
// state.hpp
// Quantum state of the rescaled system: one-particle density operator
// op = gamma / (N h^d) and pairing kernel alpha, both as periodic-grid
// kernel matrices. Operator composition is the dx-weighted matrix product,
// the operator trace is dx * sum(diag), so operator eigenvalues are the
// eigenvalues of dx * kernel.
//==============================================================================
#pragma once

#include "bdglab/grid.hpp"

#include <Eigen/Dense>

namespace bdglab::state {

using grid::cplx;
using grid::SpatialGrid;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXcd;

// kernel of the composition of two operators given by kernels
inline MatrixXcd op_product(const SpatialGrid& g, const MatrixXcd& a, const MatrixXcd& b) {
  return g.dx * (a * b);
}

inline cplx op_trace(const SpatialGrid& g, const MatrixXcd& a) {
  return g.dx * a.trace();
}

inline MatrixXcd hermitize(const MatrixXcd& a) {
  return 0.5 * (a + a.adjoint());
}

// eigenvalues of the operator with Hermitian kernel a (ascending)
VectorXd operator_spectrum(const SpatialGrid& g, const MatrixXcd& a);

struct DensityOperator {
  SpatialGrid grid;
  double N = 1;        // particle number (real, >= 1)
  MatrixXcd kernel;    // op(x_i, x_j)

  double trace() const { return std::real(op_trace(grid, kernel)); }
  // h^d * Tr(op); must be 1 for a normalized state
  double scaled_trace() const { return grid.h * trace(); }
  double spectrum_cap() const { return 1.0 / (N * grid.h); }
};

enum class PairingSymmetry { symmetric, antisymmetric };

struct PairingState {
  MatrixXcd kernel;    // alpha(x_i, x_j)
  PairingSymmetry symmetry = PairingSymmetry::symmetric;
};

struct QuantumState {
  DensityOperator op;
  PairingState alpha;
};

// theta_alpha = (1/N) * ||alpha||_{L2}^2 = dx^2 * sum |alpha_ij|^2 / N
double theta(const QuantumState& s);
double theta(const SpatialGrid& g, double N, const MatrixXcd& alpha);

// op_{alpha:1} = alpha alpha^* / (N h^d theta); defined for theta > 0
MatrixXcd pairing_marginal(const QuantumState& s);

// || N h^d op^2 + theta * op_{alpha:1} - op ||_operator
double quasifree_residual(const QuantumState& s);

struct StateDiagnostics {
  double hermiticity_error = 0;     // max |kernel - kernel^H| relative to max |kernel|
  double trace_error = 0;           // |h^d Tr op - 1|
  double spectrum_min = 0;          // min operator eigenvalue
  double spectrum_max = 0;          // max operator eigenvalue
  double cap = 0;                   // 1/(N h^d)
  double pairing_symmetry_error = 0;  // max |alpha -+ alpha^T| relative
  bool ok(double tol_herm = 1e-10, double tol_trace = 1e-8, double tol_spec = 1e-10) const;
};

StateDiagnostics diagnose(const QuantumState& s);

// Quasi-free initial data: occupations from an anti-Wick quantization of
// f_target (normalized phase-space density sampled on the induced grid),
// pairing built in the eigenbasis with theta as close to theta_target as
// attainable. Defined in state.cpp using the transforms module.
QuantumState quasifree_init(const SpatialGrid& g, double N,
                            const Eigen::MatrixXd& f_target, double theta_target,
                            PairingSymmetry symmetry);

}  // namespace bdglab::state
