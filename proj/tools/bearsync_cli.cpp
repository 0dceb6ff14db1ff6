#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "bearsync/bench.hpp"
#include "bearsync/errors.hpp"

namespace {

using namespace bearsync;

struct Common {
  std::string config;
  std::string preset;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> offset;
  std::optional<std::string> sigma;
  std::optional<int> trials;
  std::optional<int> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "key = value configuration file")->check(CLI::ExistingFile);
  app->add_option("--preset", c.preset, "named preset applied before the config file");
  app->add_option("--set", c.set, "extra key=value override (repeatable)");
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--method", c.method, "baseline, nto or ito (sweeps accept a comma list)");
  app->add_option("--offset", c.offset, "true offset in s (sweeps accept a grid)");
  app->add_option("--sigma", c.sigma, "bearing noise std (sweeps accept a grid)");
  app->add_option("--trials", c.trials, "trials per cell");
  app->add_option("--workers", c.workers, "worker threads");
  app->add_option("--out", c.out, "output directory, or report file for estimate");
}

// Precedence: preset, then config file, then --set, then dedicated flags.
ExperimentConfig build_config(const Common& c, bool sweep) {
  ExperimentConfig cfg;
  if (!c.preset.empty()) apply_preset(cfg, c.preset);
  if (!c.config.empty()) apply_config_file(cfg, c.config);
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::InvalidConfig, "--set expects key=value");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  if (c.method) apply_setting(cfg, "methods", *c.method);
  if (c.offset) apply_setting(cfg, sweep ? "offsets" : "offset", *c.offset);
  if (c.sigma) apply_setting(cfg, sweep ? "sigmas" : "sigma", *c.sigma);
  if (c.trials) cfg.trials = *c.trials;
  if (c.workers) cfg.workers = *c.workers;
  if (c.out) cfg.out = *c.out;
  return cfg;
}

void print_sweep(const SweepResult& res) {
  int ok = 0;
  for (const auto& r : res.records) ok += r.status == TrialStatus::Ok;
  std::cout << "records: " << res.records_path.string() << " (" << res.records.size() << " rows, "
            << ok << " ok)\n"
            << "summary: " << res.summary_path.string() << "\n"
            << "manifest: " << res.manifest_path.string() << "\n";
  for (const auto& f : res.failures) std::cerr << "warning: " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint clock-offset and relative pose estimation from bearings and odometry"};
  app.require_subcommand(1);

  Common sim_opts, est_opts, tol_opts, grid_opts;
  auto* sim = app.add_subcommand("simulate", "write a simulated two-robot instance");
  add_common(sim, sim_opts);

  auto* est = app.add_subcommand("estimate", "estimate from trajectory and bearing files");
  add_common(est, est_opts);
  std::string observer, observed, bearings;
  est->add_option("--observer", observer, "observer trajectory CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--observed", observed, "observed trajectory CSV")->required()->check(CLI::ExistingFile);
  est->add_option("--bearings", bearings, "bearing CSV")->required()->check(CLI::ExistingFile);

  auto* tol = app.add_subcommand("tolerance", "zero-noise offset sweep (NTO and ITO)");
  add_common(tol, tol_opts);
  auto* grid = app.add_subcommand("grid", "offset x noise sweep (baseline, NTO, ITO)");
  add_common(grid, grid_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto cfg = build_config(sim_opts, false);
      const auto files = cmd_simulate(cfg);
      std::cout << files.observer.string() << "\n" << files.observed.string() << "\n"
                << files.bearings.string() << "\n" << files.truth.string() << "\n";
    } else if (est->parsed()) {
      const auto cfg = build_config(est_opts, false);
      const Method method = cfg.methods.empty() ? Method::Nto : cfg.methods.front();
      std::vector<std::string> warnings;
      const std::string report = cmd_estimate(cfg, method, observer, observed, bearings, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      if (est_opts.out) {
        std::ofstream os(*est_opts.out);
        if (!os) throw Error(ErrorKind::Io, "cannot open '" + *est_opts.out + "'");
        os << report;
      } else {
        std::cout << report;
      }
    } else if (tol->parsed()) {
      print_sweep(cmd_tolerance(build_config(tol_opts, true)));
    } else if (grid->parsed()) {
      print_sweep(cmd_grid(build_config(grid_opts, true)));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::InvalidConfig ? 2 : 1;
  }
  return 0;
}
