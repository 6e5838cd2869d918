//==============================================================================
// kinetic.cpp
// Semi-Lagrangian transport with Strang splitting. All advections are
// constant-shift resamplings of periodic cubic splines: the collocation
// system (c_{j-1} + 4 c_j + c_{j+1})/6 = v_j is cyclic tridiagonal and is
// solved by a cached Thomas factorization plus a Sherman-Morrison rank-one
// correction. A constant shift makes the fractional offset identical for
// every output point, so one weight quadruple serves the whole pencil, and
// the partition of unity of the B-spline weights conserves mass to
// floating-point accuracy.
//==============================================================================
#include "bdglab/kinetic.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace bdglab::kinetic {
namespace {

constexpr double kOff = 1.0 / 6.0;   // collocation off-diagonal
constexpr double kDiag = 4.0 / 6.0;  // collocation diagonal

// Cached factorization of the size-n cyclic collocation system.
struct SplineFactor {
  int n = 0;
  VectorXd inv_m;  // inverted forward-elimination pivots
  VectorXd cp;     // forward-elimination multipliers
  VectorXd z;      // T^{-1} u for the Sherman-Morrison correction
  double gamma = 0;
  double denom = 1;  // 1 + v . z
};

// Thomas solve of the end-modified (acyclic) tridiagonal T y = r.
void thomas_solve(const SplineFactor& fc, const VectorXd& r, VectorXd& y) {
  const int n = fc.n;
  y[0] = r[0] * fc.inv_m[0];
  for (int i = 1; i < n; ++i) y[i] = (r[i] - kOff * y[i - 1]) * fc.inv_m[i];
  for (int i = n - 2; i >= 0; --i) y[i] -= fc.cp[i] * y[i + 1];
}

SplineFactor make_factor(int n) {
  SplineFactor fc;
  fc.n = n;
  fc.gamma = -kDiag;
  fc.inv_m.resize(n);
  fc.cp.resize(n);
  double d0 = kDiag - fc.gamma;
  double dn = kDiag - kOff * kOff / fc.gamma;
  double m = d0;
  fc.inv_m[0] = 1.0 / m;
  fc.cp[0] = kOff * fc.inv_m[0];
  for (int i = 1; i < n; ++i) {
    m = (i == n - 1 ? dn : kDiag) - kOff * fc.cp[i - 1];
    fc.inv_m[i] = 1.0 / m;
    fc.cp[i] = kOff * fc.inv_m[i];
  }
  VectorXd u = VectorXd::Zero(n);
  u[0] = fc.gamma;
  u[n - 1] = kOff;
  fc.z.resize(n);
  thomas_solve(fc, u, fc.z);
  fc.denom = 1.0 + fc.z[0] + (kOff / fc.gamma) * fc.z[n - 1];
  return fc;
}

const SplineFactor& factor_for(int n) {
  thread_local std::unordered_map<int, SplineFactor> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, make_factor(n)).first;
  return it->second;
}

// Scratch buffers reused across pencils of one sweep.
struct Pencil {
  VectorXd v, y, c;
  void resize(int n) {
    v.resize(n);
    y.resize(n);
    c.resize(n);
  }
};

// Replace the samples in p.v by the samples of their periodic cubic-spline
// interpolant evaluated at positions i - shift (cell units).
void advect_pencil(const SplineFactor& fc, Pencil& p, double shift) {
  const int n = fc.n;
  thomas_solve(fc, p.v, p.y);
  double fact = (p.y[0] + (kOff / fc.gamma) * p.y[n - 1]) / fc.denom;
  p.c = p.y - fact * fc.z;

  double p0 = -shift;
  double fl = std::floor(p0);
  double t = p0 - fl;
  double omt = 1.0 - t;
  double w0 = omt * omt * omt / 6.0;                          // c[j-1]
  double w1 = (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0;    // c[j]
  double w2 = (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0;
  double w3 = t * t * t / 6.0;                                // c[j+2]

  long j0 = static_cast<long>(fl);
  int jm1 = static_cast<int>(((j0 - 1) % n + n) % n);
  int j = (jm1 + 1) % n;
  int jp1 = (j + 1) % n;
  int jp2 = (jp1 + 1) % n;
  for (int i = 0; i < n; ++i) {
    p.v[i] = w0 * p.c[jm1] + w1 * p.c[j] + w2 * p.c[jp1] + w3 * p.c[jp2];
    jm1 = j;
    j = jp1;
    jp1 = jp2;
    ++jp2;
    if (jp2 == n) jp2 = 0;
  }
}

void check_kernel_grid(const InteractionKernel& K, const PhaseGrid& pg,
                       const char* who) {
  if (K.grid.n_x != pg.n_chi || std::abs(K.grid.L - pg.L) > 1e-14 * pg.L)
    throw std::invalid_argument(std::string(who) +
                                ": interaction kernel grid does not match the "
                                "chi grid of the density");
}

void guard_boundary(double bmass, double mass, const char* who) {
  double frac = bmass / std::max(mass, 1e-300);
  if (frac > grid::PhaseGrid::tol_boundary) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "%s: momentum-domain too small, boundary mass fraction %.3e "
                  "exceeds the admission threshold %.1e",
                  who, frac, grid::PhaseGrid::tol_boundary);
    throw std::runtime_error(msg);
  }
}

// Clip undershoots to zero and renormalize back to mass_in; returns the
// relative clipped mass. The advective mass defect must already have been
// verified, so the renormalization correction is of the order of the clip.
template <typename Array>
double clip_and_renormalize(Array& a, double mass_in, double cell, const char* who) {
  double clipped = 0;
  double* d = a.data();
  const long sz = a.size();
  for (long i = 0; i < sz; ++i)
    if (d[i] < 0) {
      clipped -= d[i];
      d[i] = 0;
    }
  double rel_clip = clipped * cell / std::max(mass_in, 1e-300);
  double mass_now = a.sum() * cell;
  if (mass_now <= 0) throw std::runtime_error(std::string(who) + ": density lost all mass");
  a *= mass_in / mass_now;
  return rel_clip;
}

void check_advective_mass(double mass_in, double mass_adv, const char* who) {
  if (std::abs(mass_adv / mass_in - 1.0) > 1e-12)
    throw std::runtime_error(std::string(who) +
                             ": advection mass defect exceeds 1e-12");
}

void check_clip_budget(double clip_accum, const char* who) {
  if (clip_accum > 1e-6)
    throw std::runtime_error(std::string(who) +
                             ": cumulative clipped mass exceeds 1e-6");
}

}  // namespace

VectorXd spline_shift(const VectorXd& v, double shift) {
  const int n = static_cast<int>(v.size());
  if (n < 4) throw std::invalid_argument("spline_shift: need at least 4 samples");
  Pencil p;
  p.resize(n);
  p.v = v;
  advect_pencil(factor_for(n), p, shift);
  return p.v;
}

void vlasov_step(PhaseDensity& f, const InteractionKernel& K, double dt,
                 double mf_factor, VectorXd* E_half) {
  const PhaseGrid& pg = f.grid;
  check_kernel_grid(K, pg, "vlasov_step");
  const double mass_in = f.mass();
  guard_boundary(grid::boundary_mass(pg, f.f), mass_in, "vlasov_step");

  const SplineFactor& fchi = factor_for(pg.n_chi);
  const SplineFactor& fxi = factor_for(pg.n_xi);
  Pencil pc, px;
  pc.resize(pg.n_chi);
  px.resize(pg.n_xi);

  auto chi_half = [&] {
    for (int j = 0; j < pg.n_xi; ++j) {
      double s = pg.xi[j] * (0.5 * dt) / pg.dchi;
      if (s == 0) continue;
      pc.v = f.f.col(j);
      advect_pencil(fchi, pc, s);
      f.f.col(j) = pc.v;
    }
  };

  chi_half();

  VectorXd E = mf_factor * interaction::force_field(K, f.rho());
  if (E_half) *E_half = E;
  for (int i = 0; i < pg.n_chi; ++i) {
    double s = E[i] * dt / pg.dxi;
    if (s == 0) continue;
    px.v = f.f.row(i).transpose();
    advect_pencil(fxi, px, s);
    f.f.row(i) = px.v.transpose();
  }

  chi_half();

  check_advective_mass(mass_in, f.mass(), "vlasov_step");
  f.clip_accum += clip_and_renormalize(f.f, mass_in, pg.cell(), "vlasov_step");
  check_clip_budget(f.clip_accum, "vlasov_step");
}

double boundary_mass(const TwoParticleDensity& F) {
  const PhaseGrid& pg = F.grid;
  const int n = pg.n_chi, m = pg.n_xi;
  const int edges[4] = {0, 1, m - 2, m - 1};
  double s = 0;
  for (int e = 0; e < 4; ++e) {
    int j1 = edges[e];
    for (int j2 = 0; j2 < m; ++j2)
      for (int i2 = 0; i2 < n; ++i2)
        for (int i1 = 0; i1 < n; ++i1) s += F.at(i1, j1, i2, j2);
    int j2 = edges[e];
    for (int j1 = 0; j1 < m; ++j1)
      for (int i2 = 0; i2 < n; ++i2)
        for (int i1 = 0; i1 < n; ++i1) s += F.at(i1, j1, i2, j2);
  }
  return s * pg.cell() * pg.cell();
}

void twoparticle_step(TwoParticleDensity& F, const VectorXd& E_half,
                      const InteractionKernel& K, double dt, double eta,
                      double N) {
  const PhaseGrid& pg = F.grid;
  check_kernel_grid(K, pg, "twoparticle_step");
  if (E_half.size() != pg.n_chi)
    throw std::invalid_argument("twoparticle_step: force field size mismatch");
  const int n = pg.n_chi, m = pg.n_xi;
  const long nz = static_cast<long>(n) * m;
  const double mass_in = F.mass();
  guard_boundary(boundary_mass(F), mass_in, "twoparticle_step");

  const SplineFactor& fchi = factor_for(n);
  const SplineFactor& fxi = factor_for(m);
  Pencil pc, px;
  pc.resize(n);
  px.resize(m);
  double* data = F.F.data();

  // chi1: contiguous pencils, shift set by xi1
  auto chi1_half = [&] {
    for (int j1 = 0; j1 < m; ++j1) {
      double s = pg.xi[j1] * (0.5 * dt) / pg.dchi;
      if (s == 0) continue;
      for (long z2 = 0; z2 < nz; ++z2) {
        double* base = data + (j1 + m * z2) * n;
        pc.v = Eigen::Map<VectorXd>(base, n);
        advect_pencil(fchi, pc, s);
        Eigen::Map<VectorXd>(base, n) = pc.v;
      }
    }
  };
  // chi2: stride-nz pencils, shift set by xi2
  auto chi2_half = [&] {
    for (int j2 = 0; j2 < m; ++j2) {
      double s = pg.xi[j2] * (0.5 * dt) / pg.dchi;
      if (s == 0) continue;
      for (long z1 = 0; z1 < nz; ++z1) {
        double* base = data + z1 + nz * (static_cast<long>(j2) * n);
        for (int i2 = 0; i2 < n; ++i2) pc.v[i2] = base[static_cast<long>(i2) * nz];
        advect_pencil(fchi, pc, s);
        for (int i2 = 0; i2 < n; ++i2) base[static_cast<long>(i2) * nz] = pc.v[i2];
      }
    }
  };

  chi1_half();
  chi2_half();

  // xi kicks; the velocity depends only on (chi1, chi2)
  const double pref = (N > 0 ? eta / N : 0.0);
  for (int i2 = 0; i2 < n; ++i2)
    for (int i1 = 0; i1 < n; ++i1) {
      double kp = pref == 0.0 ? 0.0 : pref * K.grad[((i1 - i2) % n + n) % n];
      double s1 = (E_half[i1] - kp) * dt / pg.dxi;
      double s2 = (E_half[i2] + kp) * dt / pg.dxi;
      if (s1 != 0) {
        // xi1 pencil: stride n, one per j2
        for (int j2 = 0; j2 < m; ++j2) {
          double* base = data + i1 + static_cast<long>(n) * m * (i2 + static_cast<long>(n) * j2);
          for (int j1 = 0; j1 < m; ++j1) px.v[j1] = base[static_cast<long>(j1) * n];
          advect_pencil(fxi, px, s1);
          for (int j1 = 0; j1 < m; ++j1) base[static_cast<long>(j1) * n] = px.v[j1];
        }
      }
      if (s2 != 0) {
        // xi2 pencil: stride nz*n, one per j1
        for (int j1 = 0; j1 < m; ++j1) {
          double* base = data + i1 + static_cast<long>(n) * (j1 + static_cast<long>(m) * i2);
          for (int j2 = 0; j2 < m; ++j2) px.v[j2] = base[nz * static_cast<long>(n) * j2];
          advect_pencil(fxi, px, s2);
          for (int j2 = 0; j2 < m; ++j2) base[nz * static_cast<long>(n) * j2] = px.v[j2];
        }
      }
    }

  chi2_half();
  chi1_half();

  check_advective_mass(mass_in, F.mass(), "twoparticle_step");
  double cell2 = pg.cell() * pg.cell();
  F.clip_accum += clip_and_renormalize(F.F, mass_in, cell2, "twoparticle_step");
  check_clip_budget(F.clip_accum, "twoparticle_step");
}

void coupled_evolve(PhaseDensity& f, TwoParticleDensity* F,
                    const InteractionKernel& K_fine, const InteractionKernel* K_coarse,
                    const CoupledOptions& opt) {
  check_kernel_grid(K_fine, f.grid, "coupled_evolve");
  guard_boundary(grid::boundary_mass(f.grid, f.f), f.mass(), "coupled_evolve");
  int stride = 1;
  if (F) {
    if (!K_coarse)
      throw std::invalid_argument("coupled_evolve: two-particle transport needs its own kernel");
    if (std::abs(F->grid.L - f.grid.L) > 1e-14 * f.grid.L ||
        std::abs(F->grid.xi_max - f.grid.xi_max) > 1e-14 * f.grid.xi_max)
      throw std::invalid_argument("coupled_evolve: phase-space domains differ");
    if (f.grid.n_chi % F->grid.n_chi != 0)
      throw std::invalid_argument(
          "coupled_evolve: coarse chi resolution must divide the fine one");
    check_kernel_grid(*K_coarse, F->grid, "coupled_evolve");
    guard_boundary(boundary_mass(*F), F->mass(), "coupled_evolve");
    stride = f.grid.n_chi / F->grid.n_chi;
  }

  VectorXd E_half, E_coarse;
  for (int s = 0; s < opt.steps; ++s) {
    vlasov_step(f, K_fine, opt.dt, opt.mf_factor, F ? &E_half : nullptr);
    if (F) {
      E_coarse.resize(F->grid.n_chi);
      for (int i = 0; i < F->grid.n_chi; ++i) E_coarse[i] = E_half[i * stride];
      twoparticle_step(*F, E_coarse, *K_coarse, opt.dt, opt.eta, opt.N);
    }
  }
}

double pair_feedback_norm(const TwoParticleDensity& F, const InteractionKernel& K,
                          double theta, double N) {
  const PhaseGrid& pg = F.grid;
  check_kernel_grid(K, pg, "pair_feedback_norm");
  const int n = pg.n_chi, m = pg.n_xi;
  // Fbar(i1, j1, i2) = int F dxi2
  std::vector<double> fbar(static_cast<size_t>(n) * m * n, 0.0);
  for (int j2 = 0; j2 < m; ++j2)
    for (int i2 = 0; i2 < n; ++i2)
      for (int j1 = 0; j1 < m; ++j1)
        for (int i1 = 0; i1 < n; ++i1)
          fbar[i1 + static_cast<size_t>(n) * (j1 + static_cast<size_t>(m) * i2)] +=
              F.at(i1, j1, i2, j2) * pg.dxi;
  // G(i1, j1) = int K'(chi1 - chi2) Fbar dchi2
  MatrixXd G = MatrixXd::Zero(n, m);
  for (int i2 = 0; i2 < n; ++i2)
    for (int j1 = 0; j1 < m; ++j1) {
      double w;
      for (int i1 = 0; i1 < n; ++i1) {
        w = K.grad[((i1 - i2) % n + n) % n] * pg.dchi;
        G(i1, j1) += w * fbar[i1 + static_cast<size_t>(n) * (j1 + static_cast<size_t>(m) * i2)];
      }
    }
  // centered xi-derivative (the integrand is localized, so the periodic wrap
  // only touches negligible boundary values)
  double s = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      double gp = G(i, (j + 1) % m), gm = G(i, (j - 1 + m) % m);
      double d = (gp - gm) / (2.0 * pg.dxi);
      s += d * d;
    }
  return (theta / N) * std::sqrt(s * pg.cell());
}

}  // namespace bdglab::kinetic
