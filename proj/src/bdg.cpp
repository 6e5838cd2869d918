//==============================================================================
// bdg.cpp
//==============================================================================
#include "bdglab/bdg.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>

#include "bdglab/metrics.hpp"

namespace bdglab::bdg {

using grid::cplx;
using grid::SpatialGrid;
using state::PairingSymmetry;
using Eigen::MatrixXd;
using Eigen::VectorXcd;

namespace {

constexpr int kDim = 1;

[[noreturn]] void throw_nonfinite(const char* term) {
  throw std::runtime_error(std::string("bdg: divergence, non-finite values in ") + term);
}

// rhs for a given one-particle Hamiltonian kernel (self-consistent full H for
// rk4, H minus the kinetic circulant for the strang potential substep). The
// alpha equation uses H^T = conj(H), so H must be Hermitian.
Derivative rhs_with_hamiltonian(const QuantumState& s, const InteractionKernel& K,
                                const MatrixXcd& H) {
  const SpatialGrid& g = s.op.grid;
  const double N = s.op.N;
  const MatrixXcd& G = s.op.kernel;
  const MatrixXcd& A = s.alpha.kernel;
  const cplx ih(0.0, g.hbar);

  // [H, G] = HG - (HG)^H for Hermitian H, G
  const MatrixXcd HG = H * G;
  const MatrixXcd KA = K.circulant.cast<cplx>().cwiseProduct(A);  // X_alpha kernel
  const MatrixXcd B = KA * A.adjoint();

  Derivative d;
  d.d_op = (g.dx * (HG - HG.adjoint()) + (g.dx / (N * N * g.h)) * (B - B.adjoint())) / ih;
  if (!d.d_op.allFinite()) throw_nonfinite("d_op");

  d.d_alpha = (g.dx * (H * A + A * H.transpose()) + (1.0 / N) * KA -
               g.h * g.dx * (G * KA + KA * G.transpose())) /
              ih;
  if (!d.d_alpha.allFinite()) throw_nonfinite("d_alpha");
  return d;
}

MatrixXcd self_consistent_hamiltonian(const QuantumState& s, const InteractionKernel& K,
                                      const BdGConfig& cfg) {
  MatrixXcd H = interaction::hamiltonian_matrix(K, s.op, cfg.include_exchange, cfg.mf_factor());
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.adjoint()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::runtime_error("bdg: self-consistent Hamiltonian lost Hermiticity");
  return H;
}

template <class Rhs>
void rk4_sweep(QuantumState& s, double dt, Rhs&& f) {
  QuantumState tmp = s;
  const Derivative k1 = f(s);
  tmp.op.kernel = s.op.kernel + (0.5 * dt) * k1.d_op;
  tmp.alpha.kernel = s.alpha.kernel + (0.5 * dt) * k1.d_alpha;
  const Derivative k2 = f(tmp);
  tmp.op.kernel = s.op.kernel + (0.5 * dt) * k2.d_op;
  tmp.alpha.kernel = s.alpha.kernel + (0.5 * dt) * k2.d_alpha;
  const Derivative k3 = f(tmp);
  tmp.op.kernel = s.op.kernel + dt * k3.d_op;
  tmp.alpha.kernel = s.alpha.kernel + dt * k3.d_alpha;
  const Derivative k4 = f(tmp);
  s.op.kernel += (dt / 6.0) * (k1.d_op + 2.0 * k2.d_op + 2.0 * k3.d_op + k4.d_op);
  s.alpha.kernel +=
      (dt / 6.0) * (k1.d_alpha + 2.0 * k2.d_alpha + 2.0 * k3.d_alpha + k4.d_alpha);
}

VectorXcd half_kinetic_phases(const SpatialGrid& g, double tau) {
  VectorXcd ph(g.n_x);
  for (int k = 0; k < g.n_x; ++k)
    ph[k] = std::exp(cplx(0.0, -g.p[k] * g.p[k] * tau / (2.0 * g.hbar)));
  return ph;
}

// M <- U M with the unitary matrix U = F^H diag(ph) F / n
void left_multiply_kinetic(const SpatialGrid& g, const VectorXcd& ph, MatrixXcd& M) {
  grid::raw_dft_cols(M);
  M.array().colwise() *= ph.array();
  grid::raw_idft_cols_unscaled(M);
  M /= static_cast<double>(g.n_x);
}

// M <- M U^T
void right_multiply_kinetic_t(const SpatialGrid& g, const VectorXcd& ph, MatrixXcd& M) {
  MatrixXcd mt = M.transpose();
  left_multiply_kinetic(g, ph, mt);
  M = mt.transpose();
}

// op <- U op U^H, alpha <- U alpha U^T: exact free flow over tau
void kinetic_conjugate(QuantumState& s, const VectorXcd& ph) {
  const SpatialGrid& g = s.op.grid;
  MatrixXcd& G = s.op.kernel;  // U G U^H = conj(conj(U G) U^T)
  left_multiply_kinetic(g, ph, G);
  G = G.conjugate().eval();
  right_multiply_kinetic_t(g, ph, G);
  G = G.conjugate().eval();
  MatrixXcd& A = s.alpha.kernel;
  left_multiply_kinetic(g, ph, A);
  right_multiply_kinetic_t(g, ph, A);
}

void strang_step(QuantumState& s, const InteractionKernel& K, const BdGConfig& cfg) {
  const SpatialGrid& g = s.op.grid;
  const VectorXcd ph = half_kinetic_phases(g, 0.5 * cfg.dt);
  kinetic_conjugate(s, ph);
  const MatrixXcd T = interaction::kinetic_circulant(g).cast<cplx>();
  rk4_sweep(s, cfg.dt, [&](const QuantumState& q) {
    return rhs_with_hamiltonian(q, K, self_consistent_hamiltonian(q, K, cfg) - T);
  });
  kinetic_conjugate(s, ph);
}

void enforce_invariants(QuantumState& s, double trace_in) {
  MatrixXcd& G = s.op.kernel;
  MatrixXcd& A = s.alpha.kernel;
  if (!G.allFinite()) throw_nonfinite("op after step");
  if (!A.allFinite()) throw_nonfinite("alpha after step");

  const double gscale = std::max(1.0, G.cwiseAbs().maxCoeff());
  if ((G - G.adjoint()).cwiseAbs().maxCoeff() > 1e-6 * gscale)
    throw std::runtime_error("bdg: integration failure, op hermiticity defect above 1e-6");
  G = state::hermitize(G);

  const double sgn = s.alpha.symmetry == PairingSymmetry::symmetric ? 1.0 : -1.0;
  const double ascale = std::max(1.0, A.cwiseAbs().maxCoeff());
  const MatrixXcd At = A.transpose();
  if ((A - sgn * At).cwiseAbs().maxCoeff() > 1e-6 * ascale)
    throw std::runtime_error("bdg: integration failure, alpha symmetry defect above 1e-6");
  A = 0.5 * (A + sgn * At);

  if (std::abs(s.op.scaled_trace() - trace_in) > 1e-6 * std::max(1.0, std::abs(trace_in)))
    throw std::runtime_error("bdg: integration failure, trace drift above 1e-6 in one step");
}

}  // namespace

double stability_dt_max(const grid::SpatialGrid& g, const InteractionKernel& K,
                        const BdGConfig& cfg) {
  // direct + exchange potential scale; strang handles the kinetic phases
  // exactly, so only rk4 must resolve |p|^2_max / 2
  const double v_est = (cfg.mf_factor() + 1.0) * K.sup_norm;
  double stiff = v_est;
  if (cfg.integrator == BdGConfig::Integrator::rk4)
    stiff += 0.5 * g.p_max() * g.p_max();
  return 0.5 * g.hbar / std::max(stiff, 1e-12);
}

Derivative rhs(const QuantumState& s, const InteractionKernel& K, const BdGConfig& cfg) {
  return rhs_with_hamiltonian(s, K, self_consistent_hamiltonian(s, K, cfg));
}

void step(QuantumState& s, const InteractionKernel& K, const BdGConfig& cfg) {
  if (cfg.dt <= 0) throw std::invalid_argument("bdg: dt must be positive");
  const double dt_max = stability_dt_max(s.op.grid, K, cfg);
  if (cfg.dt > dt_max) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "bdg: dt = %.3e above the stability bound %.3e", cfg.dt,
                  dt_max);
    throw std::invalid_argument(buf);
  }
  const double trace_in = s.op.scaled_trace();
  if (cfg.integrator == BdGConfig::Integrator::rk4)
    rk4_sweep(s, cfg.dt, [&](const QuantumState& q) { return rhs(q, K, cfg); });
  else
    strang_step(s, K, cfg);
  enforce_invariants(s, trace_in);
}

double energy(const QuantumState& s, const InteractionKernel& K, const BdGConfig& cfg) {
  const SpatialGrid& g = s.op.grid;
  const VectorXd m = metrics::momentum_distribution(s.op);
  double ekin = 0;
  for (int k = 0; k < g.n_x; ++k) ekin += 0.5 * g.p[k] * g.p[k] * m[k];
  const VectorXd rho = interaction::density(s.op);
  const VectorXd v = interaction::mean_field_potential(K, rho);
  const double edir = 0.5 * cfg.mf_factor() * g.dx * rho.dot(v);
  double eexch = 0.0;
  if (cfg.include_exchange)
    eexch = 0.5 * g.h * g.h * g.dx * g.dx *
            (K.circulant.array() * s.op.kernel.array().abs2()).sum();
  const double N = s.op.N;
  const double epair = (0.5 / (N * N)) * g.dx * g.dx *
                       (K.circulant.array() * s.alpha.kernel.array().abs2()).sum();
  return ekin + edir - eexch + epair;
}

double theta_rate(const QuantumState& s, const InteractionKernel& K) {
  const SpatialGrid& g = s.op.grid;
  const MatrixXcd KA = K.circulant.cast<cplx>().cwiseProduct(s.alpha.kernel);
  const cplx tr = (s.op.kernel * KA).cwiseProduct(s.alpha.kernel.conjugate()).sum();
  return -(4.0 * g.h * g.dx * g.dx * g.dx / (s.op.N * g.hbar)) * std::imag(tr);
}

ObserverRow observe(const QuantumState& s, const InteractionKernel& K,
                    const BdGConfig& cfg, double t) {
  ObserverRow r;
  r.t = t;
  r.trace = s.op.scaled_trace();
  r.energy = energy(s, K, cfg);
  r.theta = state::theta(s);
  const metrics::Moments mo = metrics::quantum_moments(s.op);
  r.M2 = mo.M2;
  r.M4 = mo.M4;
  r.N2 = mo.N2;
  r.N4 = mo.N4;
  r.schatten_2 = metrics::schatten_norm(s.op, 2.0);
  r.schatten_d = metrics::schatten_norm(s.op, static_cast<double>(kDim));
  r.quasifree_residual = state::quasifree_residual(s);
  return r;
}

const char* const kObserverHeader =
    "t,trace,energy,theta,M2,M4,N2,N4,schatten_2,schatten_d,quasifree_residual";

void write_csv_row(std::ostream& os, const ObserverRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.t,
                r.trace, r.energy, r.theta, r.M2, r.M4, r.N2, r.N4, r.schatten_2,
                r.schatten_d, r.quasifree_residual);
  os << buf << '\n';
}

ThetaCheckResult theta_trajectory_check(const std::vector<double>& theta,
                                        const std::vector<double>& rate,
                                        double dt_sample, double sup_K, double h) {
  if (theta.size() != rate.size() || theta.size() < 3)
    throw std::invalid_argument("bdg: theta check needs at least 3 aligned samples");
  if (dt_sample <= 0) throw std::invalid_argument("bdg: theta check needs dt_sample > 0");
  ThetaCheckResult res;
  for (std::size_t i = 1; i + 1 < theta.size(); ++i) {
    const double fd = (theta[i + 1] - theta[i - 1]) / (2.0 * dt_sample);
    res.max_residual = std::max(res.max_residual, std::abs(fd - rate[i]));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double bound = 2.0 * sup_K * std::pow(h, kDim - 1) * theta[i];
    if (bound > 0)
      res.max_bound_ratio = std::max(res.max_bound_ratio, std::abs(rate[i]) / bound);
  }
  res.bound_violated = res.max_bound_ratio > 1.05;
  return res;
}

}  // namespace bdglab::bdg
