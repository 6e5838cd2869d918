//==============================================================================
// metrics.hpp
// Observables and distances: momentum/position moments, rescaled Schatten
// norms, negative-order Sobolev norms on the 2-D and 4-D phase-space tori,
// and Wasserstein-2 distances (exact network simplex on small supports,
// debiased entropic solver for grid densities).
//==============================================================================
#pragma once

#include <array>
#include <string>

#include "bdglab/kinetic.hpp"
#include "bdglab/state.hpp"

namespace bdglab::metrics {

using grid::PhaseGrid;
using kinetic::PhaseDensity;
using kinetic::TwoParticleDensity;
using state::DensityOperator;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// m_k = h <e_k, op e_k> with plane waves e_k; sums to the scaled trace
VectorXd momentum_distribution(const DensityOperator& op);

struct Moments {
  double M2 = 0, M4 = 0, N2 = 0, N4 = 0;
};

// M_n = h^d Tr(op |p|^n) via the Fourier-diagonal sum; N_n = h^d Tr(op |x|^n)
// with x the minimal-image coordinate centered at the mass center of the
// position density.
Moments quantum_moments(const DensityOperator& op);

// ||op||_{L^p} = h^{d/p} (sum |eig|^p)^{1/p} over eigenvalues of the
// dx-weighted kernel; p may be infinity.
double schatten_norm(const DensityOperator& op, double p);

// || g ||_{H^{-s}} on the phase-space torus: the Fourier symbol is
// (1 + |kappa|^2)^{-s} with kappa the angular frequency of each axis
// (period L in chi, 2 xi_max in xi). s = 0 recovers the L2 norm.
double sobolev_negative_norm(const MatrixXd& g, double s, const PhaseGrid& pg);

// 4-D variant for two-particle grid functions stored flat as
// i1 + n_chi*(j1 + n_xi*(i2 + n_chi*j2)).
double sobolev_negative_norm4(const VectorXd& g, double s, const PhaseGrid& pg);

//------------------------------------------------------------------------------
// Wasserstein-2 machinery
//------------------------------------------------------------------------------

// Weighted point cloud in R^k: one atom per row of `points`. Weights must be
// nonnegative (up to rounding) and sum to 1 within 1e-12.
struct DiscreteMeasure {
  MatrixXd points;
  VectorXd weights;
};

// Throws std::invalid_argument on shape mismatch, a negative weight beyond
// rounding noise, or total mass away from 1 by more than 1e-12.
void validate_measure(const DiscreteMeasure& mu);

// Cell-center atoms in (chi, xi) with masses f * cell volume. Negative cells
// (tiny Wigner undershoots) are clipped to zero and the result renormalized.
DiscreteMeasure measure_from_density(const PhaseDensity& f);

struct TransportDiagnostics {
  int iterations = 0;             // simplex pivots or Sinkhorn sweeps
  double duality_gap = 0;         // exact solver: primal minus dual value
  double marginal_violation = 0;  // entropic solver: L1 marginal defect
};

// Squared W2 distance between small measures (combined support <= 600 atoms)
// with squared-Euclidean ground cost, solved by a dense transportation
// simplex and certified by a primal-dual gap below 1e-9. Larger inputs raise
// std::length_error pointing at the entropic solver.
double w2_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                TransportDiagnostics* diag = nullptr);

struct SinkhornOptions {
  double epsilon = 1e-2;  // entropic temperature, absolute cost units
  double tol = 1e-9;      // L1 marginal violation required at exit
  int max_iter = 20000;   // sweep budget across the epsilon-scaling ladder
};

// Debiased entropic surrogate for the squared W2 distance,
//   S_eps = OT_eps(mu, nu) - (OT_eps(mu, mu) + OT_eps(nu, nu)) / 2,
// computed with log-domain sweeps warm-started along an epsilon-scaling
// ladder. Throws std::runtime_error carrying the achieved marginal violation
// when the sweep budget runs out before `tol` is met.
double w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                   const SinkhornOptions& opt,
                   TransportDiagnostics* diag = nullptr);

// Same divergence for two densities on a common phase grid. The squared cost
// separates across the chi and xi axes, so each sweep costs
// O(n_chi^2 n_xi + n_chi n_xi^2) instead of O((n_chi n_xi)^2).
double w2_sinkhorn_grid(const PhaseDensity& a, const PhaseDensity& b,
                        const SinkhornOptions& opt,
                        TransportDiagnostics* diag = nullptr);

// Four-axis variant for two-particle densities on a common grid.
double w2_sinkhorn_grid4(const TwoParticleDensity& a,
                         const TwoParticleDensity& b,
                         const SinkhornOptions& opt,
                         TransportDiagnostics* diag = nullptr);

// Quadratic extrapolation of three (epsilon, value) samples to epsilon -> 0.
double extrapolate_to_zero(const std::array<double, 3>& eps,
                           const std::array<double, 3>& val);

struct MetricConfig {
  bool prefer_exact = true;  // use the simplex when supports are small enough
  int exact_max_points = 600;
  // Entropic temperatures as fractions of the squared support diameter; the
  // three resulting values feed the quadratic extrapolation.
  std::array<double, 3> eps_fractions{0.05, 0.02, 0.01};
  double eps_scale = 1.0;  // extra multiplier (e.g. proportional to hbar)
  double sinkhorn_tol = 1e-7;
  int sinkhorn_max_iter = 20000;
  bool two_particle_w2 = false;    // optional 4-D entropic distance
  int two_particle_w2_max = 65536; // refuse larger supports (16^4 default)
};

struct MetricReport {
  double w2sq_one_particle = 0;
  double metric_two_particle = 0;  // H^{-1} by default, 4-D W2 when enabled
  double sobolev_h1 = 0;
  double sobolev_h6 = 0;
  std::string one_particle_method;
  std::string two_particle_method;
  TransportDiagnostics transport;
};

// JSON object whose keys match the field names above.
std::string metric_report_json(const MetricReport& r);

// Distance between a kinetic pair (f, F) and the phase-space image of the
// quantum pair: squared W2 between f and the Husimi transform of s.op, and a
// negative-Sobolev norm (or optional 4-D entropic W2) between F and the
// two-particle Husimi transform of s.alpha. F may be null, in which case the
// two-particle fields stay zero.
MetricReport combined_error(const PhaseDensity& f, const state::QuantumState& s,
                            const TwoParticleDensity* F,
                            const MetricConfig& cfg);

}  // namespace bdglab::metrics
