#include "bdglab/state.hpp"

#include "bdglab/transforms.hpp"

#include <cmath>
#include <stdexcept>

namespace bdglab::state {

VectorXd operator_spectrum(const SpatialGrid& g, const MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(g.dx * a, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double theta(const SpatialGrid& g, double N, const MatrixXcd& alpha) {
  return g.dx * g.dx * alpha.squaredNorm() / N;
}

double theta(const QuantumState& s) {
  return theta(s.op.grid, s.op.N, s.alpha.kernel);
}

MatrixXcd pairing_marginal(const QuantumState& s) {
  const auto& g = s.op.grid;
  double th = theta(s);
  if (th <= 0) throw std::invalid_argument("pairing_marginal: requires theta > 0");
  return (g.dx / (s.op.N * g.h * th)) * (s.alpha.kernel * s.alpha.kernel.adjoint());
}

double quasifree_residual(const QuantumState& s) {
  const auto& g = s.op.grid;
  const double N = s.op.N;
  MatrixXcd R = N * g.h * g.dx * (s.op.kernel * s.op.kernel) +
                (g.dx / (N * g.h)) * (s.alpha.kernel * s.alpha.kernel.adjoint()) -
                s.op.kernel;
  VectorXd ev = operator_spectrum(g, hermitize(R));
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

bool StateDiagnostics::ok(double tol_herm, double tol_trace, double tol_spec) const {
  return hermiticity_error <= tol_herm && trace_error <= tol_trace &&
         spectrum_min >= -tol_spec && spectrum_max <= cap + tol_spec &&
         pairing_symmetry_error <= tol_herm;
}

StateDiagnostics diagnose(const QuantumState& s) {
  const auto& g = s.op.grid;
  StateDiagnostics d;
  double scale = std::max(s.op.kernel.cwiseAbs().maxCoeff(), 1e-300);
  d.hermiticity_error =
      (s.op.kernel - s.op.kernel.adjoint()).cwiseAbs().maxCoeff() / scale;
  d.trace_error = std::abs(s.op.scaled_trace() - 1.0);
  VectorXd ev = operator_spectrum(g, hermitize(s.op.kernel));
  d.spectrum_min = ev.minCoeff();
  d.spectrum_max = ev.maxCoeff();
  d.cap = s.op.spectrum_cap();
  double ascale = std::max(s.alpha.kernel.cwiseAbs().maxCoeff(), 1.0);
  MatrixXcd dev = (s.alpha.symmetry == PairingSymmetry::symmetric)
                      ? MatrixXcd(s.alpha.kernel - s.alpha.kernel.transpose())
                      : MatrixXcd(s.alpha.kernel + s.alpha.kernel.transpose());
  d.pairing_symmetry_error = dev.cwiseAbs().maxCoeff() / ascale;
  return d;
}

QuantumState quasifree_init(const SpatialGrid& g, double N,
                            const Eigen::MatrixXd& f_target, double theta_target,
                            PairingSymmetry symmetry) {
  kinetic::PhaseDensity f;
  f.grid = grid::PhaseGrid::induced(g);
  if (f_target.rows() != f.grid.n_chi || f_target.cols() != f.grid.n_xi)
    throw std::invalid_argument("quasifree_init: f_target must be sampled on the induced grid");
  f.f = f_target;
  double mass = f.mass();
  if (mass <= 0) throw std::invalid_argument("quasifree_init: target density has no mass");
  f.f /= mass;

  // momentum symmetry of the sampled target (xi_j <-> xi_{n-j}); required for
  // a real occupation kernel
  double fmax = f.f.maxCoeff();
  for (int j = 1; j < f.grid.n_xi; ++j)
    if ((f.f.col(j) - f.f.col(f.grid.n_xi - j)).cwiseAbs().maxCoeff() > 1e-10 * fmax)
      throw std::invalid_argument("quasifree_init: target density must be momentum-symmetric");

  DensityOperator op = transforms::antiwick_quantize(g, N, f);

  // the induced grid carries -xi_max but not +xi_max; taking the real part
  // symmetrizes that unpaired edge row (equivalent to half-weight quadrature
  // at both ends) and preserves positivity, trace and the spectrum cap
  MatrixXd kr = 0.5 * (op.kernel.real() + op.kernel.real().transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.dx * kr);
  const int n = g.n_x;
  VectorXd lam = (N * g.h * es.eigenvalues()).cwiseMax(0.0).cwiseMin(1.0);
  MatrixXd U = es.eigenvectors() / std::sqrt(g.dx);  // L2-orthonormal columns

  MatrixXd op_kernel;
  MatrixXd alpha_raw = MatrixXd::Zero(n, n);
  double theta_raw = 0;

  if (symmetry == PairingSymmetry::symmetric) {
    op_kernel = U * (lam / (N * g.h)).asDiagonal() * U.transpose();
    VectorXd c = (lam.array() * (1.0 - lam.array())).cwiseMax(0.0).sqrt();
    alpha_raw = U * c.asDiagonal() * U.transpose();
    theta_raw = c.squaredNorm() / N;
  } else {
    // pair the modes two by two from the top of the spectrum with averaged
    // occupations, so that op alpha = alpha conj(op) holds exactly
    VectorXd lam_bar = lam;
    for (int a = n - 1; a >= 1; a -= 2) {
      int b = a - 1;
      double avg = 0.5 * (lam[a] + lam[b]);
      lam_bar[a] = lam_bar[b] = avg;
      double c = std::sqrt(std::max(avg * (1.0 - avg), 0.0));
      alpha_raw += c * (U.col(a) * U.col(b).transpose() - U.col(b) * U.col(a).transpose());
      theta_raw += 2.0 * c * c / N;
    }
    op_kernel = U * (lam_bar / (N * g.h)).asDiagonal() * U.transpose();
  }

  double s = 0;
  if (theta_raw > 0) s = std::min(1.0, std::sqrt(theta_target / theta_raw));

  QuantumState st;
  st.op.grid = g;
  st.op.N = N;
  st.op.kernel = op_kernel.cast<cplx>();
  st.alpha.kernel = (s * alpha_raw).cast<cplx>();
  st.alpha.symmetry = symmetry;
  return st;
}

}  // namespace bdglab::state
