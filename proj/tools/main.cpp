// tpik command line: batch scenario runs, with/without-optimization
// comparisons, config validation and a finite-difference self check.
//
// Exit codes: 0 success, 1 internal error, 2 validation failure,
// 3 numerical abort, 4 finite-difference check above tolerance.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tpik/config_io.hpp"

namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::optional<double> dt;
  std::optional<double> duration;
  std::optional<bool> with_optimization;
  std::optional<double> damping;
};

void apply(const Overrides& overrides, tpik::ScenarioConfig& cfg) {
  if (overrides.dt) cfg.dt = *overrides.dt;
  if (overrides.duration) cfg.duration = *overrides.duration;
  if (overrides.with_optimization) cfg.with_optimization = *overrides.with_optimization;
  if (overrides.damping) cfg.solver.lambda_max = *overrides.damping;
}

void write_file(const fs::path& file, const std::string& content) {
  std::ofstream out(file, std::ios::binary);
  if (!out) {
    throw tpik::ConfigError("cannot write '" + file.string() + "'");
  }
  out << content;
}

void write_run_artifacts(const fs::path& dir, const tpik::ScenarioResult& result) {
  fs::create_directories(dir);
  std::ofstream trace(dir / "trace.csv", std::ios::binary);
  if (!trace) {
    throw tpik::ConfigError("cannot write '" + (dir / "trace.csv").string() + "'");
  }
  tpik::write_trace_csv(trace, result.trace, result.tasks);
  write_file(dir / "metrics.json", tpik::metrics_to_json(result.metrics).dump(2) + "\n");
}

int cmd_run(const fs::path& scenario_file, const fs::path& out_dir,
            const Overrides& overrides) {
  tpik::ScenarioConfig cfg = tpik::load_scenario(scenario_file);
  apply(overrides, cfg);
  cfg.validate();

  const tpik::ScenarioResult result = tpik::run_scenario(cfg);
  write_run_artifacts(out_dir, result);
  std::cout << "run '" << cfg.name << "': " << result.trace.size()
            << " cycles, rmse " << result.metrics.tracking_rmse << " m\n";
  return 0;
}

int cmd_compare(const fs::path& scenario_file, const fs::path& out_dir,
                const Overrides& overrides) {
  tpik::ScenarioConfig cfg = tpik::load_scenario(scenario_file);
  apply(overrides, cfg);

  cfg.with_optimization = false;
  cfg.validate();
  const tpik::ScenarioResult without = tpik::run_scenario(cfg);

  cfg.with_optimization = true;
  const tpik::ScenarioResult with = tpik::run_scenario(cfg);

  write_run_artifacts(out_dir / "without", without);
  write_run_artifacts(out_dir / "with", with);
  write_file(out_dir / "comparison.json",
             tpik::comparison_to_json(without.metrics, with.metrics).dump(2) + "\n");

  std::cout << "compare '" << cfg.name << "': rmse " << without.metrics.tracking_rmse
            << " -> " << with.metrics.tracking_rmse << " m, limit-reaching joints "
            << without.metrics.joints_reaching_limits << " -> "
            << with.metrics.joints_reaching_limits << "\n";
  return 0;
}

int cmd_validate(const fs::path& scenario_file) {
  const tpik::ScenarioConfig cfg = tpik::load_scenario(scenario_file);
  std::cout << "scenario '" << cfg.name << "' valid: " << cfg.chain.dof()
            << " DOF, " << cfg.hierarchy.size() << " tasks, "
            << cfg.path.waypoints.size() << " waypoints\n";
  return 0;
}

int cmd_fd_check(const fs::path& chain_file, int samples, double delta,
                 const std::string& rows_name, unsigned seed) {
  const tpik::KinematicChain chain = tpik::load_chain(chain_file);
  tpik::TaskRows rows = tpik::TaskRows::position;
  if (rows_name == "position") rows = tpik::TaskRows::position;
  else if (rows_name == "orientation") rows = tpik::TaskRows::orientation;
  else if (rows_name == "full") rows = tpik::TaskRows::full;
  else if (rows_name == "position_xy") rows = tpik::TaskRows::position_xy;
  else throw tpik::ConfigError("fd-check: unknown rows selector '" + rows_name + "'");

  const tpik::FdCheckReport report =
      tpik::manipulability_fd_check(chain, rows, samples, delta, seed);
  std::cout << "fd-check '" << chain.name << "': " << report.samples
            << " samples, max relative error " << report.max_relative_error << "\n";
  return report.max_relative_error < 1e-3 ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-based task-priority inverse kinematics batch simulator"};
  app.require_subcommand(1);

  std::string scenario, chain, out = "out";
  Overrides overrides;
  double dt = 0.0, duration = 0.0, damping = 0.0;
  bool with_optimization = false;
  int fd_samples = 100;
  double fd_delta = 1e-6;
  std::string rows = "position";
  unsigned seed = 2024;

  const auto add_overrides = [&](CLI::App* cmd) {
    cmd->add_option("--dt", dt, "control period override [s]");
    cmd->add_option("--duration", duration, "run duration override [s]");
    cmd->add_option("--with-optimization", with_optimization,
                    "force optimization tasks on or off");
    cmd->add_option("--damping", damping, "damping ceiling lambda_max override");
  };

  // Bound variables are only written once parsing finishes, so overrides are
  // collected from the parsed subcommand afterwards.
  const auto collect_overrides = [&](CLI::App* cmd) {
    if (cmd->count("--dt")) overrides.dt = dt;
    if (cmd->count("--duration")) overrides.duration = duration;
    if (cmd->count("--with-optimization")) overrides.with_optimization = with_optimization;
    if (cmd->count("--damping")) overrides.damping = damping;
  };

  CLI::App* run = app.add_subcommand("run", "run one scenario, write trace.csv and metrics.json");
  run->add_option("--scenario", scenario, "scenario file")->required();
  run->add_option("--out", out, "output directory");
  add_overrides(run);

  CLI::App* compare = app.add_subcommand(
      "compare", "run a scenario without and with optimization tasks, write comparison.json");
  compare->add_option("--scenario", scenario, "scenario file")->required();
  compare->add_option("--out", out, "output directory");
  add_overrides(compare);

  CLI::App* validate = app.add_subcommand("validate", "validate a scenario and its referenced files");
  validate->add_option("--scenario", scenario, "scenario file")->required();

  CLI::App* fd_check = app.add_subcommand(
      "fd-check", "compare the manipulability Jacobian against a central-difference oracle");
  fd_check->add_option("--chain", chain, "chain file")->required();
  fd_check->add_option("--fd-samples", fd_samples, "number of random configurations");
  fd_check->add_option("--fd-delta", fd_delta, "forward-difference step [rad]");
  fd_check->add_option("--rows", rows, "Jacobian rows: position|orientation|full|position_xy");
  fd_check->add_option("--seed", seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      collect_overrides(run);
      return cmd_run(scenario, out, overrides);
    }
    if (compare->parsed()) {
      collect_overrides(compare);
      return cmd_compare(scenario, out, overrides);
    }
    if (validate->parsed()) return cmd_validate(scenario);
    if (fd_check->parsed()) return cmd_fd_check(chain, fd_samples, fd_delta, rows, seed);
  } catch (const tpik::NumericalAbort& err) {
    std::cerr << "numerical abort: " << err.what() << "\n";
    return 3;
  } catch (const tpik::ConfigError& err) {
    std::cerr << "invalid configuration: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
