//==============================================================================
// kinetic.hpp
// Classical side: Vlasov equation for f(chi, xi) and the two-particle
// transport equation for F(z1, z2), both solved semi-Lagrangianly with
// Strang splitting and periodic cubic-spline interpolation. The pair term
// of the F equation enters as the velocity shift -+ (eta/N) K'(chi1-chi2)
// on the xi1 / xi2 advections.
//==============================================================================
#pragma once

#include "bdglab/interaction.hpp"

namespace bdglab::kinetic {

using grid::PhaseGrid;
using interaction::InteractionKernel;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct PhaseDensity {
  PhaseGrid grid;
  MatrixXd f;  // (n_chi, n_xi), column-major: flat index ichi + n_chi * ixi
  double clip_accum = 0;  // total undershoot mass clipped so far (must stay < 1e-6)

  double mass() const { return f.sum() * grid.cell(); }
  VectorXd rho() const { return f.rowwise().sum() * grid.dxi; }
};

struct TwoParticleDensity {
  PhaseGrid grid;   // per-particle grid
  VectorXd F;       // flat index i1 + n_chi*(j1 + n_xi*(i2 + n_chi*j2))
  double clip_accum = 0;

  int idx(int i1, int j1, int i2, int j2) const {
    return i1 + grid.n_chi * (j1 + grid.n_xi * (i2 + grid.n_chi * j2));
  }
  double& at(int i1, int j1, int i2, int j2) { return F[idx(i1, j1, i2, j2)]; }
  double at(int i1, int j1, int i2, int j2) const { return F[idx(i1, j1, i2, j2)]; }
  double mass() const { return F.sum() * grid.cell() * grid.cell(); }
};

// interpolate periodic samples v at positions i - shift (in cell units),
// returning the advected samples; exact for constant fields
VectorXd spline_shift(const VectorXd& v, double shift);

// mass is renormalized each step; relative corrections beyond 1e-12 throw.
// mf_factor scales the mean-field force (2 in the spinless SU(2) mode).
// E_half (if given) receives the force field at the half step.
void vlasov_step(PhaseDensity& f, const InteractionKernel& K, double dt,
                 double mf_factor = 1.0, VectorXd* E_half = nullptr);

/// E_half: force on F's chi grid at the half step; K must live on F's grid
void twoparticle_step(TwoParticleDensity& F, const VectorXd& E_half,
                      const InteractionKernel& K, double dt, double eta, double N);

// two-cell boundary mass of F along each xi axis (admission guard for the
// periodified momentum domain)
double boundary_mass(const TwoParticleDensity& F);

struct CoupledOptions {
  double dt = 1e-3;
  int steps = 0;
  double eta = 0;
  double N = 1;
  double mf_factor = 1.0;
};

// evolves f and (optionally) F with the force field of f supplied to both;
// F may live on a coarser grid whose n_chi divides f's n_chi.
// Throws if the boundary-mass admission guard fails at entry.
void coupled_evolve(PhaseDensity& f, TwoParticleDensity* F,
                    const InteractionKernel& K_fine, const InteractionKernel* K_coarse,
                    const CoupledOptions& opt);

// magnitude of the pair back-reaction source on f that the mean-field
// hierarchy drops at leading order: the L2 norm of
// (theta/N) d/dxi [ int K'(chi - chi2) F(z, z2) dz2 ].
// Purely diagnostic; never fed back into the evolution.
double pair_feedback_norm(const TwoParticleDensity& F, const InteractionKernel& K,
                          double theta, double N);

}  // namespace bdglab::kinetic
