//==============================================================================
// bdglab_main.cpp
// Command-line front end:
//   bdglab run      --config cfg.json [--out DIR]        single-cell run
//   bdglab sweep    --config cfg.json [--out DIR]        full hbar sweep
//   bdglab validate --config cfg.json                    a-priori bound table
//   bdglab plot     --report report.json --out plot.svg  convergence figure
//   bdglab plot     --csv observer.csv   --out plot.svg  time-series figure
// Exit codes: 0 success, 1 usage/config/runtime error, 2 validation failures.
//==============================================================================
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bdglab/harness.hpp"

namespace {

using namespace bdglab;

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

harness::RunConfig load_config(const std::string& path, const std::string& out_dir) {
  harness::RunConfig cfg =
      path.empty() ? harness::RunConfig{} : harness::config_from_json(slurp(path));
  if (cfg.hbar.empty()) cfg.hbar = {1.0 / (32.0 * 3.14159265358979323846)};
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  for (const auto& w : harness::regime_warnings(cfg))
    std::cerr << "warning: " << w << "\n";
  return cfg;
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  harness::RunConfig cfg = load_config(config_path, out_dir);
  const double hbar = cfg.hbar.front();
  std::printf("run: hbar = %.6g, n_x = %d, N = %.6g -> %s\n", hbar,
              harness::resolve_n_x(cfg, hbar), cfg.n_rule.resolve(hbar),
              cfg.out_dir.c_str());
  harness::RunRecord rec = harness::run_single(cfg, hbar, cfg.out_dir);
  if (!rec.ok) {
    std::cerr << "run failed: " << rec.error << "\n";
    return 1;
  }
  for (const auto& s : rec.samples)
    std::printf("  t = %-8.4g W2^2 = %-12.5e pair = %-12.5e (%s%s%s)\n", s.t,
                s.metric.w2sq_one_particle, s.metric.sobolev_h1,
                s.metric.one_particle_method.c_str(),
                s.metric.two_particle_method.empty() ? "" : " + ",
                s.metric.two_particle_method.c_str());
  std::printf(
      "  trace drift %.3e | energy drift %.3e | quasi-free growth %.3e | bounds %s\n",
      rec.trace_drift, rec.energy_drift_rel, rec.qf_growth,
      rec.bounds_pass ? "pass" : "FAIL");
  return rec.bounds_pass ? 0 : 2;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir) {
  harness::RunConfig cfg = load_config(config_path, out_dir);
  harness::SweepReport rep = harness::run_sweep(cfg);
  int failures = 0;
  for (const auto& c : rep.cells) {
    if (c.ok) {
      std::printf("  cell hbar = %-10.4e n_x = %-5d N = %-10.4g ok\n", c.hbar, c.n_x,
                  c.N);
    } else {
      std::printf("  cell hbar = %-10.4e FAILED: %s\n", c.hbar, c.error.c_str());
      ++failures;
    }
  }
  for (const auto& s : rep.slopes)
    std::printf("  t = %-8.4g slope = %.3f [%.3f, %.3f] (n = %d)\n", s.t, s.raw.slope,
                s.raw.lo, s.raw.hi, s.raw.n);
  if (!cfg.out_dir.empty())
    std::printf("report: %s/report.json (%d/%zu cells ok)\n", cfg.out_dir.c_str(),
                static_cast<int>(rep.cells.size()) - failures, rep.cells.size());
  return 0;
}

int cmd_validate(const std::string& config_path) {
  harness::RunConfig cfg = load_config(config_path, "");
  const auto rows = harness::validate(cfg);
  std::cout << harness::validation_table(rows);
  for (const auto& r : rows)
    if (!r.pass) return 2;
  return 0;
}

int cmd_plot(const std::string& report_path, const std::string& csv_path,
             const std::string& out_path) {
  std::string svg;
  if (!report_path.empty())
    svg = harness::plot_convergence_svg(slurp(report_path));
  else
    svg = harness::plot_timeseries_svg(slurp(csv_path));
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot open " + out_path);
  os << svg;
  std::printf("wrote %s (%zu bytes)\n", out_path.c_str(), svg.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semiclassical pairing laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", harness::kVersion);

  std::string config_path, out_dir, report_path, csv_path, out_path;

  CLI::App* run = app.add_subcommand("run", "evolve one cell and write artifacts");
  run->add_option("--config", config_path, "run configuration JSON");
  run->add_option("--out", out_dir, "artifact directory (overrides config)");

  CLI::App* sweep = app.add_subcommand("sweep", "run every hbar cell and fit slopes");
  sweep->add_option("--config", config_path, "run configuration JSON");
  sweep->add_option("--out", out_dir, "artifact directory (overrides config)");

  CLI::App* validate = app.add_subcommand("validate", "print the a-priori bound table");
  validate->add_option("--config", config_path, "run configuration JSON");

  CLI::App* plot = app.add_subcommand("plot", "render a report or CSV as SVG");
  auto* ropt = plot->add_option("--report", report_path, "sweep report JSON");
  auto* copt = plot->add_option("--csv", csv_path, "observer CSV");
  plot->add_option("--out", out_path, "output SVG path")->required();
  ropt->excludes(copt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (sweep->parsed()) return cmd_sweep(config_path, out_dir);
    if (validate->parsed()) return cmd_validate(config_path);
    if (plot->parsed()) {
      if (report_path.empty() && csv_path.empty())
        throw CLI::ValidationError("plot", "needs --report or --csv");
      return cmd_plot(report_path, csv_path, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
