//==============================================================================
// harness.hpp
// Experiment orchestration: JSON run configuration, single-run and sweep
// drivers with per-cell crash isolation, a-priori inequality validation
// tables, log-log slope fits with bootstrap intervals, and SVG emission.
//==============================================================================
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bdglab/bdg.hpp"
#include "bdglab/metrics.hpp"
#include "bdglab/transforms.hpp"

namespace bdglab::harness {

extern const char* const kVersion;

//------------------------------------------------------------------------------
// Configuration
//------------------------------------------------------------------------------

struct KernelSpec {
  std::string type = "gaussian";  // gaussian | cosine | zero
  double a = 0.4;                 // amplitude
  double sigma = 0.25;            // gaussian width
  int m = 1;                      // cosine mode index
};

struct InitSpec {
  std::string family = "gaussian";  // gaussian | double_bump
  double center_chi = 1.0;
  double center_xi = 0.0;
  double sigma_chi = 0.22;
  double sigma_xi = 0.13;
  std::array<double, 2> bump_chi{0.7, 1.3};  // double_bump centers
  double theta_target = 0.3;
};

struct PairSpec {
  bool enabled = true;
  std::string source = "husimi2";  // husimi2 | product
  int n_chi = 16;                  // must divide every resolved n_x
  int n_xi = 8;
};

// Particle-number rule: fixed N, N = c / h^d (constant N h^d), or
// N = c / hbar (constant N hbar).
struct NRule {
  std::string kind = "fixed";  // fixed | scaled | regime_nh
  double value = 16;
  double resolve(double hbar) const;
};

struct RunConfig {
  double L = 2.0;
  int n_x = 64;       // used when n_x_per_M == 0
  int n_x_per_M = 0;  // when > 0: n_x = n_x_per_M * round(1 / (2 pi hbar))
  std::vector<double> hbar;
  NRule n_rule;
  KernelSpec kernel;
  InitSpec init;
  double eta = 0.0;  // pair-force switch in the classical hierarchy, 0 or 1
  double dt = 1e-3;
  double T = 0.5;
  std::vector<double> sample_times{0.25, 0.5};  // t = 0 is always sampled
  std::string integrator = "strang";            // rk4 | strang
  bool spinless = true;                         // factor-2 mean field
  PairSpec pair;
  metrics::MetricConfig metric;
  std::string out_dir = "out";
  std::uint64_t seed = 1234;
  int workers = 4;

  bdg::BdGConfig bdg_config() const;
};

// Parse a JSON document; missing fields keep defaults, malformed or
// inconsistent values throw std::invalid_argument naming the field.
RunConfig config_from_json(const std::string& text);
// Resolved round-trippable echo, including the version string.
std::string config_json(const RunConfig& cfg);

// Regime-consistency advisories (never errors): the pair-corrected hierarchy
// (eta = 1) is meaningful on sweeps where N h -> 0, the uncorrected one
// (eta = 0) where N hbar stays bounded below.
std::vector<std::string> regime_warnings(const RunConfig& cfg);

int resolve_n_x(const RunConfig& cfg, double hbar);

//------------------------------------------------------------------------------
// Single run
//------------------------------------------------------------------------------

struct SampleRow {
  double t = 0;
  metrics::MetricReport metric;
  double pair_feedback = 0;  // diagnostic source norm dropped by the hierarchy
};

struct RunRecord {
  double hbar = 0, N = 0;
  int n_x = 0;
  bool ok = false;
  std::string error;  // structured failure message when !ok
  std::vector<SampleRow> samples;
  // conserved-quantity drifts over the whole trajectory
  double trace_drift = 0;
  double energy_drift_rel = 0;
  double qf_growth = 0;
  double theta_final = 0;
  double classical_mass_drift = 0;
  // initial-data hypothesis log: fourth moment and pairing L2 size vs N h
  double init_m4 = 0;
  double init_alpha_l2 = 0;
  double init_alpha_l2_cap = 0;  // N h
  bool bounds_pass = false;
  std::vector<std::string> bound_failures;
};

// Evolve the quantum and classical sides in lockstep from the shared initial
// density and report metric samples. When `dir` is nonempty it receives
// config.json, observer.csv, metrics.json and snapshot_t*.bdgs files.
RunRecord run_single(const RunConfig& cfg, double hbar, const std::string& dir);

//------------------------------------------------------------------------------
// Sweep + slope fit
//------------------------------------------------------------------------------

struct SlopeFit {
  double slope = 0, intercept = 0;
  double lo = 0, hi = 0;  // 95% bootstrap interval
  int n = 0;              // points used
};

// OLS fit of y against x for (x, y) = (log hbar, log error) pairs with a
// seeded bootstrap percentile interval. Points with nonpositive error are
// skipped; fewer than 2 usable points throw std::invalid_argument.
SlopeFit fit_loglog(const std::vector<std::array<double, 2>>& pts,
                    std::uint64_t seed, int resamples = 1000);

struct SlopeRow {
  double t = 0;
  SlopeFit raw;      // total squared error against hbar
  SlopeFit floored;  // same with the measured t = 0 error subtracted
};

struct SweepReport {
  int schema = 1;
  std::string version;
  std::string config_echo;  // resolved config JSON text
  std::vector<std::string> warnings;
  std::vector<RunRecord> cells;  // ascending hbar
  std::vector<SlopeRow> slopes;  // one per sample time > 0, plus t = 0
};

// Run every hbar cell (workers in parallel, one output subdirectory each,
// failures isolated into the cell record) and fit slopes over the successes.
// Throws std::runtime_error("sweep: insufficient data ...") when fewer than
// 4 cells succeed.
SweepReport run_sweep(const RunConfig& cfg);

std::string sweep_report_json(const SweepReport& r);
SweepReport sweep_report_from_json(const std::string& text);

//------------------------------------------------------------------------------
// Validation table
//------------------------------------------------------------------------------

struct ValidationRow {
  std::string name;
  double value = 0;
  double bound = 0;
  double margin = 0;  // (bound - value) / max(|bound|, eps); negative = fail
  bool pass = false;
  std::string note;
};

// Short trajectory (t <= 0.5) at the first hbar; one row per checkable
// inequality: conservation laws, moment growth bounds with the explicit
// constants C_{E,K} = 2 E(0) + (mf + 2)||K||_inf and
// C_K = 3 (hbar ||K''||_inf + 2 ||K'||_inf sqrt(C_{E,K})), Schatten growth,
// the theta rate formula and its growth ratio, and quasi-free preservation.
// Integration failures become failing rows, not exceptions.
std::vector<ValidationRow> validate(const RunConfig& cfg);

std::string validation_table(const std::vector<ValidationRow>& rows);

//------------------------------------------------------------------------------
// Plots (pure functions from artifact text to SVG text)
//------------------------------------------------------------------------------

// Log-log scatter of total squared error vs hbar per sample time with the
// fitted line and a "slope = a.aaa +- b.bbb" annotation. Throws
// std::invalid_argument on malformed JSON or an empty report.
std::string plot_convergence_svg(const std::string& report_json);

// Conserved-quantity traces (trace defect, energy drift, theta, quasi-free
// residual) against time from an observer CSV stream.
std::string plot_timeseries_svg(const std::string& observer_csv);

//------------------------------------------------------------------------------
// State snapshots
//------------------------------------------------------------------------------

// Binary snapshot of the quantum kernels plus the classical densities
// ("BDGS" magic, little-endian doubles, column-major matrices).
void write_snapshot(std::ostream& os, const state::QuantumState& s,
                    const kinetic::PhaseDensity& f,
                    const kinetic::TwoParticleDensity* F);

struct Snapshot {
  state::QuantumState s;
  kinetic::PhaseDensity f;
  bool has_pair = false;
  kinetic::TwoParticleDensity F;
};

Snapshot read_snapshot(std::istream& is);

}  // namespace bdglab::harness
