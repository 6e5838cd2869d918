#include <doctest.h>

#include "bdglab/harness.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

using namespace bdglab;
using std::numbers::pi;

namespace {

// interaction-free configuration: with K = 0 neither transport equation ever
// advects in xi, so the admission guards are inert and every cell is cheap
harness::RunConfig free_config() {
  harness::RunConfig cfg;
  cfg.L = 2.0;
  cfg.n_x = 32;
  cfg.hbar = {1.0 / (12.0 * pi)};
  cfg.n_rule = {"fixed", 1.0};
  cfg.kernel.type = "zero";
  cfg.init.family = "gaussian";
  cfg.init.center_chi = 1.0;
  cfg.init.sigma_chi = 0.5;
  cfg.init.sigma_xi = 0.2;
  cfg.init.theta_target = 0.3;
  cfg.dt = 0.01;
  cfg.T = 0.2;
  cfg.sample_times = {0.1, 0.2};
  cfg.integrator = "strang";
  cfg.pair.enabled = true;
  cfg.pair.source = "husimi2";
  cfg.pair.n_chi = 16;
  cfg.pair.n_xi = 32;
  cfg.out_dir.clear();
  return cfg;
}

double total_err(const harness::SampleRow& s) {
  return s.metric.w2sq_one_particle + s.metric.sobolev_h1 * s.metric.sobolev_h1;
}

}  // namespace

//------------------------------------------------------------------------------
// configuration
//------------------------------------------------------------------------------

TEST_CASE("config: JSON round trip preserves every field") {
  harness::RunConfig cfg = free_config();
  cfg.hbar = {0.01, 0.02};
  cfg.eta = 1.0;
  cfg.n_rule = {"fixed", 7.0};
  cfg.metric.eps_fractions = {0.04, 0.02, 0.005};
  cfg.seed = 99;
  cfg.workers = 3;
  cfg.out_dir = "somewhere";

  harness::RunConfig back = harness::config_from_json(harness::config_json(cfg));
  CHECK(back.n_x == cfg.n_x);
  CHECK(back.hbar == cfg.hbar);
  CHECK(back.n_rule.kind == cfg.n_rule.kind);
  CHECK(back.n_rule.value == doctest::Approx(7.0));
  CHECK(back.kernel.type == "zero");
  CHECK(back.init.sigma_chi == doctest::Approx(0.5));
  CHECK(back.eta == doctest::Approx(1.0));
  CHECK(back.sample_times == cfg.sample_times);
  CHECK(back.pair.n_xi == 32);
  CHECK(back.metric.eps_fractions == cfg.metric.eps_fractions);
  CHECK(back.seed == 99);
  CHECK(back.workers == 3);
  CHECK(back.out_dir == "somewhere");
}

TEST_CASE("config: missing fields keep defaults") {
  harness::RunConfig cfg = harness::config_from_json("{\"n_x\": 48}");
  CHECK(cfg.n_x == 48);
  CHECK(cfg.L == doctest::Approx(2.0));
  CHECK(cfg.integrator == "strang");
  CHECK(cfg.kernel.type == "gaussian");
  CHECK(cfg.hbar.size() == 1);  // populated with the default resolution
}

TEST_CASE("config: invalid values name the offending field") {
  CHECK_THROWS_WITH_AS(harness::config_from_json("{\"integrator\": \"euler\"}"),
                       doctest::Contains("integrator"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(harness::config_from_json("{\"eta\": 0.5}"),
                       doctest::Contains("eta"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(harness::config_from_json("{\"kernel\": {\"type\": \"yukawa\"}}"),
                       doctest::Contains("kernel.type"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(harness::config_from_json("{\"dt\": -1}"),
                       doctest::Contains("dt"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(harness::config_from_json("{\"n_x\": \"many\"}"),
                       doctest::Contains("n_x"), std::invalid_argument);
  CHECK_THROWS_AS(harness::config_from_json("not json at all"), std::invalid_argument);
}

TEST_CASE("config: particle-number rules") {
  harness::NRule fixed{"fixed", 16.0};
  CHECK(fixed.resolve(0.01) == doctest::Approx(16.0));

  harness::NRule scaled{"scaled", 0.5};
  // N h^d stays constant: N = value / (2 pi hbar)
  CHECK(scaled.resolve(1.0 / (2.0 * pi)) == doctest::Approx(0.5));
  CHECK(scaled.resolve(1.0 / (4.0 * pi)) == doctest::Approx(1.0));

  harness::NRule regime{"regime_nh", 0.2};
  CHECK(regime.resolve(0.1) == doctest::Approx(2.0));

  harness::NRule bogus{"cubic", 1.0};
  CHECK_THROWS_AS(bogus.resolve(0.1), std::invalid_argument);
  // rules that give N < 1 are rejected with the offending numbers
  CHECK_THROWS_WITH_AS(scaled.resolve(0.5), doctest::Contains("< 1"),
                       std::invalid_argument);
}

TEST_CASE("config: resolution rule follows the semiclassical index") {
  harness::RunConfig cfg = free_config();
  cfg.n_x_per_M = 8;
  CHECK(harness::resolve_n_x(cfg, 1.0 / (2.0 * pi * 16)) == 128);
  CHECK(harness::resolve_n_x(cfg, 1.0 / (2.0 * pi * 48)) == 384);
  cfg.n_x_per_M = 0;
  CHECK(harness::resolve_n_x(cfg, 1.0 / (2.0 * pi * 16)) == cfg.n_x);
}

TEST_CASE("config: regime advisories") {
  harness::RunConfig cfg = free_config();
  cfg.eta = 0.0;
  cfg.hbar = {0.02, 0.01};
  cfg.n_rule = {"fixed", 4.0};
  auto w = harness::regime_warnings(cfg);  // fixed N lets N hbar vanish
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("eta = 0") != std::string::npos);

  cfg.n_rule = {"scaled", 0.5};
  CHECK(harness::regime_warnings(cfg).empty());

  cfg.eta = 1.0;  // pair-corrected: now the scaled rule is the suspect one
  CHECK(harness::regime_warnings(cfg).size() == 1);
  cfg.n_rule = {"fixed", 4.0};
  CHECK(harness::regime_warnings(cfg).empty());
}

//------------------------------------------------------------------------------
// slope fitting
//------------------------------------------------------------------------------

TEST_CASE("fit_loglog: recovers an exact power law with a collapsed interval") {
  std::vector<std::array<double, 2>> pts;
  for (double x : {0.01, 0.02, 0.04, 0.08}) pts.push_back({x, 3.0 * x * x});
  harness::SlopeFit fit = harness::fit_loglog(pts, 7);
  CHECK(fit.n == 4);
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-10));
  // exact data: every bootstrap resample lies on the same line
  CHECK(fit.lo == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.hi == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("fit_loglog: interval widens with scatter and is seed-stable") {
  std::vector<std::array<double, 2>> pts = {
      {0.01, 2.1e-4}, {0.02, 3.6e-4}, {0.04, 9.5e-4}, {0.08, 1.4e-3}, {0.16, 3.9e-3}};
  harness::SlopeFit a = harness::fit_loglog(pts, 11);
  harness::SlopeFit b = harness::fit_loglog(pts, 11);
  CHECK(a.slope == b.slope);
  CHECK(a.lo == b.lo);
  CHECK(a.hi == b.hi);
  CHECK(a.lo < a.slope);
  CHECK(a.hi > a.slope);
}

TEST_CASE("fit_loglog: nonpositive points are skipped, too few throw") {
  std::vector<std::array<double, 2>> pts = {
      {0.01, 1e-4}, {0.02, 0.0}, {0.04, -3.0}, {0.08, 6.4e-3}};
  harness::SlopeFit fit = harness::fit_loglog(pts, 3);
  CHECK(fit.n == 2);  // only the positive pair survives
  CHECK(fit.slope == doctest::Approx(2.0).epsilon(1e-9));

  CHECK_THROWS_AS(harness::fit_loglog({{0.01, -1.0}, {0.02, 0.0}}, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(harness::fit_loglog({}, 3), std::invalid_argument);
}

//------------------------------------------------------------------------------
// snapshots
//------------------------------------------------------------------------------

TEST_CASE("snapshot: binary round trip is exact") {
  harness::RunConfig cfg = free_config();
  harness::RunRecord rec = harness::run_single(cfg, cfg.hbar.front(), "");
  REQUIRE(rec.ok);

  // rebuild the initial structures directly for a state to serialize
  auto g = grid::SpatialGrid::make(cfg.L, cfg.n_x, cfg.hbar.front());
  auto pg = grid::PhaseGrid::induced(g);
  Eigen::MatrixXd f0(pg.n_chi, pg.n_xi);
  for (int i = 0; i < pg.n_chi; ++i)
    for (int j = 0; j < pg.n_xi; ++j) {
      double dc = (pg.chi[i] - 1.0) / 0.5, dx = pg.xi[j] / 0.2;
      f0(i, j) = std::exp(-dc * dc - dx * dx);
    }
  f0 /= f0.sum() * pg.cell();
  auto s = state::quasifree_init(g, 1.0, f0, 0.3, state::PairingSymmetry::symmetric);
  kinetic::PhaseDensity f{pg, f0, 0.0};
  auto ppg = grid::PhaseGrid::make(cfg.L, 16, pg.xi_max, 32);
  auto F = transforms::husimi_two_particle(s, ppg);

  std::stringstream buf;
  harness::write_snapshot(buf, s, f, &F);
  harness::Snapshot back = harness::read_snapshot(buf);

  CHECK(back.s.op.grid.n_x == g.n_x);
  CHECK(back.s.op.N == doctest::Approx(1.0));
  CHECK((back.s.op.kernel - s.op.kernel).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.s.alpha.kernel - s.alpha.kernel).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.s.alpha.symmetry == state::PairingSymmetry::symmetric);
  CHECK((back.f.f - f.f).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(back.has_pair);
  CHECK(back.F.grid.n_chi == 16);
  CHECK((back.F.F - F.F).cwiseAbs().maxCoeff() == 0.0);

  std::stringstream no_pair;
  harness::write_snapshot(no_pair, s, f, nullptr);
  CHECK_FALSE(harness::read_snapshot(no_pair).has_pair);

  std::stringstream junk("BDGX and other bytes");
  CHECK_THROWS_AS(harness::read_snapshot(junk), std::runtime_error);
}

//------------------------------------------------------------------------------
// single run
//------------------------------------------------------------------------------

TEST_CASE("run_single: interaction-free flow conserves everything in sight") {
  harness::RunConfig cfg = free_config();
  harness::RunRecord rec = harness::run_single(cfg, cfg.hbar.front(), "");
  REQUIRE_MESSAGE(rec.ok, rec.error);
  CHECK(rec.n_x == 32);
  CHECK(rec.N == doctest::Approx(1.0));
  REQUIRE(rec.samples.size() == 3);  // t = 0 plus the two requested times

  // free Strang flow applies exact Fourier phases: conservation to rounding
  CHECK(rec.trace_drift < 1e-10);
  CHECK(rec.energy_drift_rel < 1e-10);
  CHECK(rec.qf_growth < 1e-8);
  CHECK(rec.classical_mass_drift < 1e-12);
  CHECK(rec.bounds_pass);

  // zero kernel: the dropped pair back-reaction vanishes identically
  for (const auto& s : rec.samples) CHECK(s.pair_feedback == 0.0);

  // both sides stream freely from matched data; the transport distance stays
  // at the scale of the initial smoothing offset instead of accumulating
  const double e0 = total_err(rec.samples[0]);
  CHECK(e0 > 0);
  for (const auto& s : rec.samples) CHECK(total_err(s) < 4.0 * e0);

  // the initial-data log is filled in
  CHECK(rec.init_m4 > 0);
  CHECK(rec.init_alpha_l2 > 0);
  CHECK(rec.init_alpha_l2_cap == doctest::Approx(1.0 * 2.0 * pi * cfg.hbar.front()));
  CHECK(rec.theta_final == doctest::Approx(0.3).epsilon(0.05));
}

TEST_CASE("run_single: runs are deterministic") {
  harness::RunConfig cfg = free_config();
  cfg.sample_times = {0.1};
  cfg.T = 0.1;
  harness::RunRecord a = harness::run_single(cfg, cfg.hbar.front(), "");
  harness::RunRecord b = harness::run_single(cfg, cfg.hbar.front(), "");
  REQUIRE(a.ok);
  REQUIRE(b.ok);
  CHECK(a.trace_drift == b.trace_drift);
  CHECK(a.energy_drift_rel == b.energy_drift_rel);
  CHECK(a.theta_final == b.theta_final);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    CHECK(a.samples[i].metric.w2sq_one_particle == b.samples[i].metric.w2sq_one_particle);
}

TEST_CASE("run_single: artifacts land in the output directory") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "bdglab_test_run";
  fs::remove_all(dir);

  harness::RunConfig cfg = free_config();
  cfg.sample_times = {0.1};
  cfg.T = 0.1;
  harness::RunRecord rec = harness::run_single(cfg, cfg.hbar.front(), dir.string());
  REQUIRE_MESSAGE(rec.ok, rec.error);

  CHECK(fs::exists(dir / "config.json"));
  CHECK(fs::exists(dir / "observer.csv"));
  CHECK(fs::exists(dir / "metrics.json"));
  CHECK(fs::exists(dir / "snapshot_t0.000000.bdgs"));
  CHECK(fs::exists(dir / "snapshot_t0.100000.bdgs"));

  // the echoed config parses back to the same resolution
  std::ifstream is(dir / "config.json");
  std::stringstream ss;
  ss << is.rdbuf();
  harness::RunConfig echo = harness::config_from_json(ss.str());
  CHECK(echo.n_x == cfg.n_x);
  CHECK(echo.T == doctest::Approx(cfg.T));

  // the t = 0 snapshot restores the exact initial trace
  std::ifstream snap(dir / "snapshot_t0.000000.bdgs", std::ios::binary);
  harness::Snapshot s0 = harness::read_snapshot(snap);
  CHECK(s0.s.op.scaled_trace() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(s0.f.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s0.has_pair);

  // observer CSV has the extended header and one metric-bearing row per sample
  std::ifstream csv(dir / "observer.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header.find("t,trace,energy") == 0);
  CHECK(header.find("w2sq_one_particle") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("run_single: infeasible cells fail structurally, not fatally") {
  harness::RunConfig cfg = free_config();
  cfg.init.sigma_chi = 0.06;  // far above the occupation cap: quantization refuses
  cfg.init.sigma_xi = 0.06;
  harness::RunRecord rec = harness::run_single(cfg, cfg.hbar.front(), "");
  CHECK_FALSE(rec.ok);
  CHECK(rec.error.find("antiwick") != std::string::npos);
  CHECK(rec.samples.empty());
}

//------------------------------------------------------------------------------
// sweep
//------------------------------------------------------------------------------

namespace {

harness::RunConfig sweep_config() {
  harness::RunConfig cfg = free_config();
  cfg.n_x = 0;
  cfg.n_x_per_M = 12;
  cfg.hbar.clear();
  for (int M : {3, 4, 5, 6}) cfg.hbar.push_back(1.0 / (2.0 * pi * M));
  cfg.n_rule = {"fixed", 1.0};
  cfg.init.sigma_chi = 0.5;
  cfg.init.sigma_xi = 0.25;
  cfg.pair.enabled = false;  // exercised by the single-run tests
  cfg.dt = 0.01;
  cfg.T = 0.1;
  cfg.sample_times = {0.1};
  cfg.out_dir.clear();
  cfg.workers = 2;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("run_sweep: the smoothing offset of matched initial data scales like hbar") {
  harness::RunConfig cfg = sweep_config();
  harness::SweepReport rep = harness::run_sweep(cfg);

  REQUIRE(rep.cells.size() == 4);
  for (const auto& c : rep.cells) {
    CHECK_MESSAGE(c.ok, c.error);
    REQUIRE(c.samples.size() == 2);
  }
  // cells come back sorted by hbar
  CHECK(rep.cells[0].hbar < rep.cells[1].hbar);
  // resolution follows the index: n_x = 12 M
  CHECK(rep.cells[3].n_x == 36);
  CHECK(rep.cells[0].n_x == 72);

  REQUIRE(rep.slopes.size() == 2);  // t = 0 and t = 0.1
  for (const auto& s : rep.slopes) {
    CHECK(s.raw.n == 4);
    // W2^2 against the half-hbar-smoothed quantization is linear in hbar
    CHECK(s.raw.slope > 0.75);
    CHECK(s.raw.slope < 1.35);
  }

  // report JSON round trip preserves cells and slopes
  harness::SweepReport back = harness::sweep_report_from_json(harness::sweep_report_json(rep));
  REQUIRE(back.cells.size() == rep.cells.size());
  CHECK(back.slopes.size() == rep.slopes.size());
  CHECK(back.cells[2].samples[1].metric.w2sq_one_particle ==
        doctest::Approx(rep.cells[2].samples[1].metric.w2sq_one_particle));
  CHECK(back.slopes[1].raw.slope == doctest::Approx(rep.slopes[1].raw.slope));
}

TEST_CASE("run_sweep: one poisoned cell is isolated, too many abort") {
  harness::RunConfig cfg = sweep_config();
  cfg.hbar.push_back(1.0 / (2.0 * pi * 8));
  // N = 0.3 M across the ladder: exactly the M = 3 cell dips below one particle
  cfg.n_rule = {"scaled", 0.3};
  harness::SweepReport rep = harness::run_sweep(cfg);
  REQUIRE(rep.cells.size() == 5);
  int failures = 0;
  for (const auto& c : rep.cells)
    if (!c.ok) {
      ++failures;
      CHECK(c.error.find("< 1") != std::string::npos);
      CHECK(c.hbar == doctest::Approx(1.0 / (6.0 * pi)));
    }
  CHECK(failures == 1);
  for (const auto& s : rep.slopes) CHECK(s.raw.n == 4);

  // two poisoned cells out of four usable: below the fit quorum
  harness::RunConfig bad = sweep_config();
  bad.hbar = {1.0 / (4.0 * pi), 1.0 / (6.0 * pi), 1.0 / (16.0 * pi), 1.0 / (24.0 * pi)};
  bad.n_rule = {"scaled", 0.3};
  CHECK_THROWS_WITH_AS(harness::run_sweep(bad), doctest::Contains("insufficient"),
                       std::runtime_error);

  // fewer than four cells cannot support a slope at all
  harness::RunConfig tiny = sweep_config();
  tiny.hbar.resize(3);
  CHECK_THROWS_AS(harness::run_sweep(tiny), std::invalid_argument);
}

//------------------------------------------------------------------------------
// validation
//------------------------------------------------------------------------------

TEST_CASE("validate: interaction-free flow passes every inequality") {
  harness::RunConfig cfg = free_config();
  cfg.pair.enabled = false;
  cfg.T = 0.1;
  auto rows = harness::validate(cfg);
  REQUIRE(rows.size() >= 8);
  for (const auto& r : rows) {
    CAPTURE(r.name);
    CAPTURE(r.value);
    CAPTURE(r.bound);
    CHECK(r.pass);
  }
  std::string table = harness::validation_table(rows);
  CHECK(table.find("trace-conservation") != std::string::npos);
  CHECK(table.find("FAIL") == std::string::npos);
}

TEST_CASE("validate: an unstable step size yields failing rows, not exceptions") {
  harness::RunConfig cfg = free_config();
  cfg.kernel = {"gaussian", 0.4, 0.25, 1};
  cfg.dt = 0.1;  // far beyond the admissible step for this stiffness
  cfg.T = 0.5;
  auto rows = harness::validate(cfg);
  REQUIRE_FALSE(rows.empty());
  bool any_fail = false;
  for (const auto& r : rows) any_fail = any_fail || !r.pass;
  CHECK(any_fail);
  // the failure note carries the integrator's message
  bool noted = false;
  for (const auto& r : rows)
    noted = noted || r.note.find("dt") != std::string::npos ||
            r.note.find("step") != std::string::npos;
  CHECK(noted);
  CHECK(harness::validation_table(rows).find("FAIL") != std::string::npos);
}

//------------------------------------------------------------------------------
// plots
//------------------------------------------------------------------------------

TEST_CASE("plot_convergence_svg: annotates the fitted slope") {
  // synthetic two-cell-per-time report lying exactly on a slope-1 line
  harness::SweepReport rep;
  rep.version = harness::kVersion;
  rep.config_echo = "{}";
  for (double hb : {0.01, 0.02, 0.04, 0.08}) {
    harness::RunRecord c;
    c.hbar = hb;
    c.N = 1;
    c.n_x = 16;
    c.ok = true;
    harness::SampleRow s;
    s.t = 0.5;
    s.metric.w2sq_one_particle = 3.0 * hb;  // exact power law
    s.metric.one_particle_method = "synthetic";
    c.samples.push_back(s);
    rep.cells.push_back(c);
  }
  std::vector<std::array<double, 2>> pts;
  for (const auto& c : rep.cells)
    pts.push_back({c.hbar, c.samples[0].metric.w2sq_one_particle});
  harness::SlopeRow row;
  row.t = 0.5;
  row.raw = harness::fit_loglog(pts, 1);
  rep.slopes.push_back(row);

  std::string svg = harness::plot_convergence_svg(harness::sweep_report_json(rep));
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("slope = 1.000") != std::string::npos);
  CHECK(svg.find("\xC2\xB1 0.000") != std::string::npos);

  CHECK_THROWS_AS(harness::plot_convergence_svg("{\"schema\": 1, \"cells\": []}"),
                  std::invalid_argument);
  CHECK_THROWS_AS(harness::plot_convergence_svg("{nope"), std::invalid_argument);
}

TEST_CASE("plot_timeseries_svg: renders an observer stream and rejects junk") {
  std::ostringstream csv;
  csv << bdg::kObserverHeader << ",w2sq_one_particle,metric_two_particle,sobolev_h1,sobolev_h6\n";
  for (int k = 0; k <= 10; ++k) {
    double t = 0.01 * k;
    csv << t << "," << 1.0 + 1e-12 * k << "," << 0.5 << "," << 0.3 * std::exp(-t) << ","
        << 0.2 << "," << 0.1 << "," << 0.05 << "," << 0.01 << "," << 1.1 << "," << 1.0
        << "," << 1e-9 * k << ",,,,\n";
  }
  std::string svg = harness::plot_timeseries_svg(csv.str());
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("theta") != std::string::npos);

  CHECK_THROWS_AS(harness::plot_timeseries_svg("h,e,a,d,e,r\n1,2,3,4,5,6\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(harness::plot_timeseries_svg(std::string(bdg::kObserverHeader) + "\n"),
                  std::invalid_argument);
}
