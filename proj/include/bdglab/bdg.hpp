//==============================================================================
// bdg.hpp
// Time integration of the coupled rescaled pairing system for (op, alpha):
//   ih d_t op    = [H_op, op] + P,    P = (1/(N^2 h^d)) dx (B - B^H),
//                                     B = (K o alpha) alpha^H,
//   ih d_t alpha = H_op alpha + alpha H_op^T + (1/N) K o alpha
//                  - h^d (op_1 + op_2)(K o alpha),
// with H_op = |p|^2/2 + mf * (K * rho) - h^d X_op and "o" the entrywise
// product by K(x_i - x_j). Integrators: classic RK4 on the kernel pair, or
// Strang splitting with the kinetic conjugation applied exactly by FFT.
//==============================================================================
#pragma once

#include <iosfwd>
#include <vector>

#include "bdglab/interaction.hpp"

namespace bdglab::bdg {

using interaction::InteractionKernel;
using state::QuantumState;
using Eigen::MatrixXcd;
using Eigen::VectorXd;

struct BdGConfig {
  double dt = 1e-3;
  double T = 1.0;
  enum class Integrator { rk4, strang };
  Integrator integrator = Integrator::rk4;
  bool include_exchange = true;
  bool spinless_mode = true;  // symmetric alpha, factor-2 mean field
  int observer_stride = 10;

  double mf_factor() const { return spinless_mode ? 2.0 : 1.0; }
};

// largest admissible step, c_stab = 0.5 over the stiffness estimate:
// rk4 resolves the kinetic phases (|p|^2_max/2 enters), strang applies them
// exactly so only the potential scale counts.
double stability_dt_max(const grid::SpatialGrid& g, const InteractionKernel& K,
                        const BdGConfig& cfg);

struct Derivative {
  MatrixXcd d_op;
  MatrixXcd d_alpha;
};

Derivative rhs(const QuantumState& s, const InteractionKernel& K, const BdGConfig& cfg);

// advance by cfg.dt; re-hermitizes op and re-imposes the alpha symmetry once
// per step. Throws on non-finite values or invariant defects beyond 1e-6.
void step(QuantumState& s, const InteractionKernel& K, const BdGConfig& cfg);

// the conserved functional
//   h^d Tr(|p|^2/2 op) + (mf/2) int V rho - (h^{2d}/2) Tr(X_op op)
//   + (1/(2 N^2)) dx^2 sum K |alpha|^2
double energy(const QuantumState& s, const InteractionKernel& K, const BdGConfig& cfg);

// instantaneous d theta / dt carried by the pairing flow:
// -(4 h^d/(N hbar)) Im Tr(op X_alpha alpha^*)
double theta_rate(const QuantumState& s, const InteractionKernel& K);

struct ObserverRow {
  double t = 0, trace = 0, energy = 0, theta = 0;
  double M2 = 0, M4 = 0, N2 = 0, N4 = 0;
  double schatten_2 = 0, schatten_d = 0, quasifree_residual = 0;
};

ObserverRow observe(const QuantumState& s, const InteractionKernel& K,
                    const BdGConfig& cfg, double t);
extern const char* const kObserverHeader;
void write_csv_row(std::ostream& os, const ObserverRow& r);

struct ThetaCheckResult {
  double max_residual = 0;     // |centered FD of theta - formula rate|
  double max_bound_ratio = 0;  // max |rate| / (2 ||K||_inf h^{d-1} theta)
  bool bound_violated = false; // ratio beyond 5% slack
};

// theta and rate sampled every dt_sample along one trajectory
ThetaCheckResult theta_trajectory_check(const std::vector<double>& theta,
                                        const std::vector<double>& rate,
                                        double dt_sample, double sup_K, double h);

}  // namespace bdglab::bdg
