//==============================================================================
// wasserstein.cpp
// Squared-W2 distances between discrete measures: a dense transportation
// simplex certified by its primal-dual gap for small supports, and debiased
// log-domain entropic solvers (with epsilon scaling) for grid densities where
// the squared cost separates across axes.
//==============================================================================
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bdglab/metrics.hpp"
#include "bdglab/transforms.hpp"
#include "json.hpp"

namespace bdglab::metrics {

using state::QuantumState;

void validate_measure(const DiscreteMeasure& mu) {
  if (mu.points.rows() != mu.weights.size())
    throw std::invalid_argument("measure: atom/weight count mismatch");
  if (mu.points.rows() == 0)
    throw std::invalid_argument("measure: empty support");
  if (mu.weights.minCoeff() < -1e-15)
    throw std::invalid_argument("measure: negative weight");
  if (std::abs(mu.weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("measure: total mass must be 1");
}

DiscreteMeasure measure_from_density(const PhaseDensity& f) {
  const PhaseGrid& pg = f.grid;
  DiscreteMeasure mu;
  mu.points.resize(pg.n_chi * pg.n_xi, 2);
  mu.weights.resize(pg.n_chi * pg.n_xi);
  for (int j = 0; j < pg.n_xi; ++j)
    for (int i = 0; i < pg.n_chi; ++i) {
      const int k = i + pg.n_chi * j;
      mu.points(k, 0) = pg.chi[i];
      mu.points(k, 1) = pg.xi[j];
      mu.weights[k] = std::max(f.f(i, j), 0.0) * pg.cell();
    }
  const double mass = mu.weights.sum();
  if (!(mass > 0)) throw std::invalid_argument("measure: nonpositive mass");
  mu.weights /= mass;
  return mu;
}

namespace {

[[noreturn]] void throw_no_convergence(int sweeps, double viol, double tol) {
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "w2_sinkhorn: no convergence after %d sweeps, marginal "
                "violation %.3e (tol %.3e)",
                sweeps, viol, tol);
  throw std::runtime_error(buf);
}

// Atoms with zero weight carry no mass and only slow the solvers down.
void drop_zero_atoms(const DiscreteMeasure& in, MatrixXd& pts, VectorXd& w) {
  std::vector<int> keep;
  for (int i = 0; i < in.weights.size(); ++i)
    if (in.weights[i] > 0) keep.push_back(i);
  pts.resize(static_cast<int>(keep.size()), in.points.cols());
  w.resize(static_cast<int>(keep.size()));
  for (int k = 0; k < static_cast<int>(keep.size()); ++k) {
    pts.row(k) = in.points.row(keep[k]);
    w[k] = in.weights[keep[k]];
  }
  w /= w.sum();
}

MatrixXd pairwise_sq_cost(const MatrixXd& x, const MatrixXd& y) {
  MatrixXd c(x.rows(), y.rows());
  for (int j = 0; j < y.rows(); ++j)
    c.col(j) = (x.rowwise() - y.row(j)).rowwise().squaredNorm();
  return c;
}

//------------------------------------------------------------------------------
// Dense transportation simplex. Nodes 0..m-1 are mu-atoms, m..m+n-1 are
// nu-atoms; the basis is a spanning tree of m+n-1 arcs initialized by the
// northwest-corner rule. Entering arcs are picked by the most negative
// reduced cost, with a switch to Bland's rule as an anti-cycling safeguard.
//------------------------------------------------------------------------------
class TransportSimplex {
 public:
  TransportSimplex(const MatrixXd& cost, const VectorXd& a, const VectorXd& b)
      : c_(cost), a_(a), b_(b), m_(static_cast<int>(a.size())),
        n_(static_cast<int>(b.size())) {
    arc_row_.reserve(m_ + n_ - 1);
    arc_col_.reserve(m_ + n_ - 1);
    flow_.reserve(m_ + n_ - 1);
    adj_.assign(m_ + n_, {});
    northwest_corner();
    pot_.resize(m_ + n_);
    parent_arc_.resize(m_ + n_);
  }

  void solve() {
    const double tol = 1e-12 * (1.0 + c_.maxCoeff());
    const int bland_after = 60 * (m_ + n_);
    const int hard_cap = 400 * (m_ + n_) + 20000;
    for (;;) {
      compute_potentials();
      int er = -1, ec = -1;
      double best = -tol;
      if (pivots_ < bland_after) {
        for (int i = 0; i < m_; ++i)
          for (int j = 0; j < n_; ++j) {
            const double red = c_(i, j) - pot_[i] - pot_[m_ + j];
            if (red < best) { best = red; er = i; ec = j; }
          }
      } else {
        for (int i = 0; i < m_ && er < 0; ++i)
          for (int j = 0; j < n_; ++j)
            if (c_(i, j) - pot_[i] - pot_[m_ + j] < -tol) { er = i; ec = j; break; }
      }
      if (er < 0) break;
      pivot(er, ec);
      if (++pivots_ > hard_cap)
        throw std::runtime_error("w2_exact: simplex stalled");
    }
  }

  double value() const {
    double v = 0;
    for (size_t k = 0; k < flow_.size(); ++k)
      v += flow_[k] * c_(arc_row_[k], arc_col_[k]);
    return v;
  }

  double dual_value() const {
    double v = 0;
    for (int i = 0; i < m_; ++i) v += a_[i] * pot_[i];
    for (int j = 0; j < n_; ++j) v += b_[j] * pot_[m_ + j];
    return v;
  }

  int pivots() const { return pivots_; }

 private:
  void add_arc(int i, int j, double f) {
    const int slot = static_cast<int>(flow_.size());
    arc_row_.push_back(i);
    arc_col_.push_back(j);
    flow_.push_back(f);
    adj_[i].push_back(slot);
    adj_[m_ + j].push_back(slot);
  }

  void northwest_corner() {
    int i = 0, j = 0;
    double ra = a_[0], rb = b_[0];
    for (;;) {
      const double f = std::min(ra, rb);
      add_arc(i, j, f);
      ra -= f;
      rb -= f;
      if (i == m_ - 1 && j == n_ - 1) break;
      if ((ra <= rb && i < m_ - 1) || j == n_ - 1) ra = a_[++i];
      else rb = b_[++j];
    }
  }

  // Tree traversal fixing pot_[0] = 0 and c = pot_row + pot_col on basic arcs.
  void compute_potentials() {
    std::vector<char> seen(m_ + n_, 0);
    std::vector<int> stack{0};
    pot_[0] = 0;
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int slot : adj_[u]) {
        const int v = (u < m_) ? m_ + arc_col_[slot] : arc_row_[slot];
        if (seen[v]) continue;
        pot_[v] = c_(arc_row_[slot], arc_col_[slot]) - pot_[u];
        seen[v] = 1;
        stack.push_back(v);
      }
    }
  }

  // Adding arc (er, ec) closes one cycle through the tree; push flow around
  // it until the first basic arc on the reverse orientation empties.
  void pivot(int er, int ec) {
    std::fill(parent_arc_.begin(), parent_arc_.end(), -1);
    std::vector<int> stack{er};
    parent_arc_[er] = -2;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (u == m_ + ec) break;
      for (int slot : adj_[u]) {
        const int v = (u < m_) ? m_ + arc_col_[slot] : arc_row_[slot];
        if (parent_arc_[v] != -1) continue;
        parent_arc_[v] = slot;
        stack.push_back(v);
      }
    }
    std::vector<int> path;  // arcs from the ec-node back to the er-node
    for (int u = m_ + ec; u != er;) {
      const int slot = parent_arc_[u];
      path.push_back(slot);
      u = (u < m_) ? m_ + arc_col_[slot] : arc_row_[slot];
    }
    // Even path positions (starting at the nu endpoint) lose flow.
    double delta = std::numeric_limits<double>::infinity();
    int leave = -1;
    for (size_t k = 0; k < path.size(); k += 2)
      if (flow_[path[k]] < delta ||
          (flow_[path[k]] == delta && path[k] < leave)) {
        delta = flow_[path[k]];
        leave = path[k];
      }
    for (size_t k = 0; k < path.size(); ++k)
      flow_[path[k]] += (k % 2 == 0) ? -delta : delta;
    detach(leave);
    arc_row_[leave] = er;
    arc_col_[leave] = ec;
    flow_[leave] = delta;
    adj_[er].push_back(leave);
    adj_[m_ + ec].push_back(leave);
  }

  void detach(int slot) {
    for (int node : {arc_row_[slot], m_ + arc_col_[slot]}) {
      auto& lst = adj_[node];
      lst.erase(std::find(lst.begin(), lst.end(), slot));
    }
  }

  const MatrixXd& c_;
  const VectorXd& a_;
  const VectorXd& b_;
  int m_, n_;
  std::vector<int> arc_row_, arc_col_;
  std::vector<double> flow_;
  std::vector<std::vector<int>> adj_;
  std::vector<double> pot_;
  std::vector<int> parent_arc_;
  int pivots_ = 0;
};

//------------------------------------------------------------------------------
// Log-domain Sinkhorn sweeps. Each problem type exposes the same surface:
// set_eps precomputes the Gibbs kernels, g_update / f_update perform one
// half-sweep each (f_update returns the L1 row-marginal violation), and
// value() evaluates the dual objective <f, mu> + <g, nu>.
//------------------------------------------------------------------------------

VectorXd lse_rows(const MatrixXd& m, MatrixXd& work) {
  const VectorXd mx = m.rowwise().maxCoeff();
  work = m.colwise() - mx;
  return (mx.array() + work.array().exp().rowwise().sum().log()).matrix();
}

VectorXd log_floor(const VectorXd& w) {
  return w.array().max(1e-300).log().matrix();
}

struct DenseEntropic {
  MatrixXd c;
  VectorXd wa, wb, la, lb, f, g;
  double eps = 0;
  MatrixXd kern, work;

  DenseEntropic(MatrixXd cost, VectorXd a, VectorXd b)
      : c(std::move(cost)), wa(std::move(a)), wb(std::move(b)),
        la(log_floor(wa)), lb(log_floor(wb)),
        f(VectorXd::Zero(wa.size())), g(VectorXd::Zero(wb.size())) {}

  double cost_scale() const { return c.maxCoeff(); }

  void set_eps(double e) {
    eps = e;
    kern = -c / eps;
  }

  void g_update() {
    MatrixXd msg = kern.colwise() + (la + f / eps);
    g = -eps * lse_rows(msg.transpose().eval(), work);
  }

  double f_update() {
    MatrixXd msg = kern.rowwise() + (lb + g / eps).transpose();
    VectorXd f_next = -eps * lse_rows(msg, work);
    const double viol =
        (wa.array() * ((f - f_next).array() / eps).exp() - wa.array())
            .abs()
            .sum();
    f = f_next;
    return viol;
  }

  double value() const { return wa.dot(f) + wb.dot(g); }
};

// Two-axis grid problem: potentials live on the (n_chi, n_xi) grid and each
// half-sweep reduces one axis at a time through the separable Gibbs kernel.
struct Grid2Entropic {
  MatrixXd dchi, dxi;      // squared axis distances
  MatrixXd la, lb, wa, wb; // log-weights and weights, (n_chi, n_xi)
  MatrixXd f, g;           // potentials
  double eps = 0;
  MatrixXd kchi, kxi, work, worka;

  Grid2Entropic(const PhaseGrid& pg, const MatrixXd& a, const MatrixXd& b) {
    auto table = [](const VectorXd& x) {
      MatrixXd d(x.size(), x.size());
      for (int j = 0; j < x.size(); ++j)
        d.col(j) = (x.array() - x[j]).square();
      return d;
    };
    dchi = table(pg.chi);
    dxi = table(pg.xi);
    auto weights = [&](const MatrixXd& dens) {
      MatrixXd w = (dens.array().max(0.0) * pg.cell()).matrix();
      const double mass = w.sum();
      if (!(mass > 0))
        throw std::invalid_argument("w2_sinkhorn_grid: nonpositive mass");
      return MatrixXd(w / mass);
    };
    wa = weights(a);
    wb = weights(b);
    la = wa.array().max(1e-300).log().matrix();
    lb = wb.array().max(1e-300).log().matrix();
    f = MatrixXd::Zero(a.rows(), a.cols());
    g = f;
  }

  double cost_scale() const { return dchi.maxCoeff() + dxi.maxCoeff(); }

  void set_eps(double e) {
    eps = e;
    kchi = -dchi / eps;
    kxi = -dxi / eps;
  }

  // out(t1, t2) = LSE_{s1, s2} [ msg(s1, s2) + kchi(t1, s1) + kxi(t2, s2) ]
  MatrixXd lse2(const MatrixXd& msg) {
    const int n = static_cast<int>(msg.rows());
    const int m = static_cast<int>(msg.cols());
    MatrixXd mid(n, m), out(n, m);
    for (int s2 = 0; s2 < m; ++s2) {
      worka = kchi.rowwise() + msg.col(s2).transpose();
      mid.col(s2) = lse_rows(worka, work);
    }
    for (int t1 = 0; t1 < n; ++t1) {
      worka = kxi.rowwise() + mid.row(t1);
      out.row(t1) = lse_rows(worka, work).transpose();
    }
    return out;
  }

  void g_update() { g = -eps * lse2(la + f / eps); }

  double f_update() {
    MatrixXd f_next = -eps * lse2(lb + g / eps);
    const double viol =
        (wa.array() * ((f - f_next).array() / eps).exp() - wa.array())
            .abs()
            .sum();
    f = f_next;
    return viol;
  }

  double value() const {
    return (wa.array() * f.array()).sum() + (wb.array() * g.array()).sum();
  }
};

// Four-axis variant on flat two-particle tensors, axis sizes
// (n_chi, n_xi, n_chi, n_xi) with strides growing left to right.
struct Grid4Entropic {
  MatrixXd dchi, dxi;
  VectorXd la, lb, wa, wb, f, g;
  int n = 0, m = 0;
  double eps = 0;
  MatrixXd kchi, kxi, work, worka;
  VectorXd buf_in, buf_out;

  Grid4Entropic(const PhaseGrid& pg, const VectorXd& a, const VectorXd& b) {
    auto table = [](const VectorXd& x) {
      MatrixXd d(x.size(), x.size());
      for (int j = 0; j < x.size(); ++j)
        d.col(j) = (x.array() - x[j]).square();
      return d;
    };
    dchi = table(pg.chi);
    dxi = table(pg.xi);
    n = pg.n_chi;
    m = pg.n_xi;
    const double cell2 = pg.cell() * pg.cell();
    auto weights = [&](const VectorXd& dens) {
      VectorXd w = (dens.array().max(0.0) * cell2).matrix();
      const double mass = w.sum();
      if (!(mass > 0))
        throw std::invalid_argument("w2_sinkhorn_grid4: nonpositive mass");
      return VectorXd(w / mass);
    };
    wa = weights(a);
    wb = weights(b);
    la = log_floor(wa);
    lb = log_floor(wb);
    f = VectorXd::Zero(a.size());
    g = f;
  }

  double cost_scale() const { return 2 * (dchi.maxCoeff() + dxi.maxCoeff()); }

  void set_eps(double e) {
    eps = e;
    kchi = -dchi / eps;
    kxi = -dxi / eps;
  }

  void lse_axis(VectorXd& t, const MatrixXd& k, int na, long stride) {
    const long total = t.size();
    const long nlines = total / na;
    buf_in.resize(na);
    for (long line = 0; line < nlines; ++line) {
      const long base = (line / stride) * stride * na + (line % stride);
      for (int s = 0; s < na; ++s) buf_in[s] = t[base + s * stride];
      worka = k.rowwise() + buf_in.transpose();
      buf_out = lse_rows(worka, work);
      for (int s = 0; s < na; ++s) t[base + s * stride] = buf_out[s];
    }
  }

  VectorXd lse4(VectorXd msg) {
    lse_axis(msg, kchi, n, 1);
    lse_axis(msg, kxi, m, n);
    lse_axis(msg, kchi, n, static_cast<long>(n) * m);
    lse_axis(msg, kxi, m, static_cast<long>(n) * m * n);
    return msg;
  }

  void g_update() { g = -eps * lse4(la + f / eps); }

  double f_update() {
    VectorXd f_next = -eps * lse4(lb + g / eps);
    const double viol =
        (wa.array() * ((f - f_next).array() / eps).exp() - wa.array())
            .abs()
            .sum();
    f = f_next;
    return viol;
  }

  double value() const { return wa.dot(f) + wb.dot(g); }
};

// Epsilon-scaling ladder: start at a quarter of the cost scale, halve down to
// the target temperature, and run sweeps at each level (looser tolerance and
// a small cap mid-ladder; the full budget and tolerance at the target).
template <class Problem>
double entropic_value(Problem& prob, const SinkhornOptions& opt, int& sweeps,
                      double& viol_out) {
  std::vector<double> ladder;
  for (double e = std::max(opt.epsilon, 0.25 * prob.cost_scale());; e *= 0.5) {
    if (e <= opt.epsilon * (1.0 + 1e-12)) {
      ladder.push_back(opt.epsilon);
      break;
    }
    ladder.push_back(e);
  }
  double viol = std::numeric_limits<double>::infinity();
  for (size_t lv = 0; lv < ladder.size(); ++lv) {
    const bool last = lv + 1 == ladder.size();
    const double ltol = last ? opt.tol : std::max(opt.tol, 1e-4);
    prob.set_eps(ladder[lv]);
    for (int it = 0; sweeps < opt.max_iter; ++it) {
      prob.g_update();
      viol = prob.f_update();
      ++sweeps;
      if (viol < ltol) break;
      if (!last && it >= 80) break;
    }
    if (last && viol >= ltol) throw_no_convergence(sweeps, viol, opt.tol);
  }
  viol_out = std::max(viol_out, viol);
  return prob.value();
}

}  // namespace

double w2_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                TransportDiagnostics* diag) {
  validate_measure(mu);
  validate_measure(nu);
  if (mu.points.cols() != nu.points.cols())
    throw std::invalid_argument("w2_exact: dimension mismatch");
  if (mu.points.rows() + nu.points.rows() > 600)
    throw std::length_error(
        "w2_exact: combined support exceeds 600 atoms; use w2_sinkhorn");
  MatrixXd xa, xb;
  VectorXd wa, wb;
  drop_zero_atoms(mu, xa, wa);
  drop_zero_atoms(nu, xb, wb);
  wb *= wa.sum() / wb.sum();  // exact balance for the simplex
  const MatrixXd cost = pairwise_sq_cost(xa, xb);
  TransportSimplex simplex(cost, wa, wb);
  simplex.solve();
  const double value = simplex.value();
  const double gap = value - simplex.dual_value();
  if (!(std::abs(gap) <= 1e-9 * std::max(1.0, value)))
    throw std::runtime_error("w2_exact: duality gap above certificate level");
  if (diag) {
    diag->iterations = simplex.pivots();
    diag->duality_gap = gap;
    diag->marginal_violation = 0;
  }
  return value;
}

double w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                   const SinkhornOptions& opt, TransportDiagnostics* diag) {
  validate_measure(mu);
  validate_measure(nu);
  if (mu.points.cols() != nu.points.cols())
    throw std::invalid_argument("w2_sinkhorn: dimension mismatch");
  if (!(opt.epsilon > 0))
    throw std::invalid_argument("w2_sinkhorn: epsilon must be positive");
  MatrixXd xa, xb;
  VectorXd wa, wb;
  drop_zero_atoms(mu, xa, wa);
  drop_zero_atoms(nu, xb, wb);
  int sweeps = 0;
  double viol = 0;
  DenseEntropic ab(pairwise_sq_cost(xa, xb), wa, wb);
  DenseEntropic aa(pairwise_sq_cost(xa, xa), wa, wa);
  DenseEntropic bb(pairwise_sq_cost(xb, xb), wb, wb);
  const double v_ab = entropic_value(ab, opt, sweeps, viol);
  const double v_aa = entropic_value(aa, opt, sweeps, viol);
  const double v_bb = entropic_value(bb, opt, sweeps, viol);
  if (diag) {
    diag->iterations = sweeps;
    diag->duality_gap = 0;
    diag->marginal_violation = viol;
  }
  return v_ab - 0.5 * (v_aa + v_bb);
}

namespace {

void require_same_grid(const PhaseGrid& a, const PhaseGrid& b,
                       const char* who) {
  if (a.n_chi != b.n_chi || a.n_xi != b.n_xi ||
      std::abs(a.L - b.L) > 1e-12 || std::abs(a.xi_max - b.xi_max) > 1e-9)
    throw std::invalid_argument(std::string(who) + ": grids differ");
}

}  // namespace

double w2_sinkhorn_grid(const PhaseDensity& a, const PhaseDensity& b,
                        const SinkhornOptions& opt,
                        TransportDiagnostics* diag) {
  require_same_grid(a.grid, b.grid, "w2_sinkhorn_grid");
  if (!(opt.epsilon > 0))
    throw std::invalid_argument("w2_sinkhorn_grid: epsilon must be positive");
  int sweeps = 0;
  double viol = 0;
  Grid2Entropic ab(a.grid, a.f, b.f);
  Grid2Entropic aa(a.grid, a.f, a.f);
  Grid2Entropic bb(a.grid, b.f, b.f);
  const double v_ab = entropic_value(ab, opt, sweeps, viol);
  const double v_aa = entropic_value(aa, opt, sweeps, viol);
  const double v_bb = entropic_value(bb, opt, sweeps, viol);
  if (diag) {
    diag->iterations = sweeps;
    diag->duality_gap = 0;
    diag->marginal_violation = viol;
  }
  return v_ab - 0.5 * (v_aa + v_bb);
}

double w2_sinkhorn_grid4(const TwoParticleDensity& a,
                         const TwoParticleDensity& b,
                         const SinkhornOptions& opt,
                         TransportDiagnostics* diag) {
  require_same_grid(a.grid, b.grid, "w2_sinkhorn_grid4");
  if (a.F.size() != b.F.size())
    throw std::invalid_argument("w2_sinkhorn_grid4: sizes differ");
  if (!(opt.epsilon > 0))
    throw std::invalid_argument("w2_sinkhorn_grid4: epsilon must be positive");
  int sweeps = 0;
  double viol = 0;
  Grid4Entropic ab(a.grid, a.F, b.F);
  Grid4Entropic aa(a.grid, a.F, a.F);
  Grid4Entropic bb(a.grid, b.F, b.F);
  const double v_ab = entropic_value(ab, opt, sweeps, viol);
  const double v_aa = entropic_value(aa, opt, sweeps, viol);
  const double v_bb = entropic_value(bb, opt, sweeps, viol);
  if (diag) {
    diag->iterations = sweeps;
    diag->duality_gap = 0;
    diag->marginal_violation = viol;
  }
  return v_ab - 0.5 * (v_aa + v_bb);
}

double extrapolate_to_zero(const std::array<double, 3>& eps,
                           const std::array<double, 3>& val) {
  double out = 0;
  for (int k = 0; k < 3; ++k) {
    double lk = 1;
    for (int l = 0; l < 3; ++l) {
      if (l == k) continue;
      const double den = eps[l] - eps[k];
      if (den == 0)
        throw std::invalid_argument("extrapolate_to_zero: repeated epsilon");
      lk *= eps[l] / den;
    }
    out += val[k] * lk;
  }
  return out;
}

MetricReport combined_error(const PhaseDensity& f, const QuantumState& s,
                            const TwoParticleDensity* F,
                            const MetricConfig& cfg) {
  const PhaseDensity hus = transforms::husimi(s.op);
  require_same_grid(f.grid, hus.grid, "combined_error");
  MetricReport r;

  const int atoms = 2 * f.grid.n_chi * f.grid.n_xi;
  if (cfg.prefer_exact && atoms <= cfg.exact_max_points) {
    r.w2sq_one_particle = std::max(
        0.0, w2_exact(measure_from_density(f), measure_from_density(hus),
                      &r.transport));
    r.one_particle_method = "exact-simplex";
  } else {
    const double span_chi = f.grid.dchi * (f.grid.n_chi - 1);
    const double span_xi = f.grid.dxi * (f.grid.n_xi - 1);
    const double diam2 = span_chi * span_chi + span_xi * span_xi;
    std::array<double, 3> epss{}, vals{};
    SinkhornOptions opt;
    opt.tol = cfg.sinkhorn_tol;
    opt.max_iter = cfg.sinkhorn_max_iter;
    for (int k = 0; k < 3; ++k) {
      epss[k] = cfg.eps_fractions[k] * diam2 * cfg.eps_scale;
      opt.epsilon = epss[k];
      TransportDiagnostics d;
      vals[k] = w2_sinkhorn_grid(f, hus, opt, &d);
      r.transport.iterations += d.iterations;
      r.transport.marginal_violation =
          std::max(r.transport.marginal_violation, d.marginal_violation);
    }
    r.w2sq_one_particle = std::max(0.0, extrapolate_to_zero(epss, vals));
    r.one_particle_method = "sinkhorn-debiased-extrapolated";
  }

  if (F) {
    const TwoParticleDensity h2 = transforms::husimi_two_particle(s, F->grid);
    const VectorXd diff = F->F - h2.F;
    r.sobolev_h1 = sobolev_negative_norm4(diff, 1.0, F->grid);
    r.sobolev_h6 = sobolev_negative_norm4(diff, 6.0, F->grid);
    if (cfg.two_particle_w2) {
      if (F->F.size() > cfg.two_particle_w2_max)
        throw std::length_error(
            "combined_error: two-particle support too large for the 4-D "
            "entropic distance");
      const double span_chi = F->grid.dchi * (F->grid.n_chi - 1);
      const double span_xi = F->grid.dxi * (F->grid.n_xi - 1);
      const double diam2 = 2 * (span_chi * span_chi + span_xi * span_xi);
      std::array<double, 3> epss{}, vals{};
      SinkhornOptions opt;
      opt.tol = cfg.sinkhorn_tol;
      opt.max_iter = cfg.sinkhorn_max_iter;
      for (int k = 0; k < 3; ++k) {
        epss[k] = cfg.eps_fractions[k] * diam2 * cfg.eps_scale;
        opt.epsilon = epss[k];
        TransportDiagnostics d;
        vals[k] = w2_sinkhorn_grid4(*F, h2, opt, &d);
        r.transport.iterations += d.iterations;
        r.transport.marginal_violation =
            std::max(r.transport.marginal_violation, d.marginal_violation);
      }
      r.metric_two_particle = std::max(0.0, extrapolate_to_zero(epss, vals));
      r.two_particle_method = "sinkhorn-4d-debiased-extrapolated";
    } else {
      r.metric_two_particle = r.sobolev_h1;
      r.two_particle_method = "sobolev-h1";
    }
  }
  return r;
}

std::string metric_report_json(const MetricReport& r) {
  nlohmann::json j{
      {"w2sq_one_particle", r.w2sq_one_particle},
      {"metric_two_particle", r.metric_two_particle},
      {"sobolev_h1", r.sobolev_h1},
      {"sobolev_h6", r.sobolev_h6},
      {"one_particle_method", r.one_particle_method},
      {"two_particle_method", r.two_particle_method},
      {"transport",
       {{"iterations", r.transport.iterations},
        {"duality_gap", r.transport.duality_gap},
        {"marginal_violation", r.transport.marginal_violation}}},
  };
  return j.dump(2);
}

}  // namespace bdglab::metrics
