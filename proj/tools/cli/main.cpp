#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "gora/workflow/sweep.hpp"
#include "gora/workflow/validation.hpp"

namespace fs = std::filesystem;
using namespace gora::workflow;

namespace {

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("gora");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("GORA_LOG")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only honour it when asked for explicitly.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
  }
}

struct CommonArgs {
  std::string scenario;
  std::string out;
  int workers = 1;
  std::optional<std::uint64_t> seed_override;

  RunOptions run_options() const {
    RunOptions o;
    o.workers = workers;
    o.seed_override = seed_override;
    if (!out.empty()) o.event_log_dir = fs::path(out);
    return o;
  }
};

void add_scenario_flag(CLI::App* cmd, CommonArgs& args, bool required) {
  auto* opt = cmd->add_option("--scenario", args.scenario, "Scenario file (JSON)")->check(CLI::ExistingFile);
  if (required) opt->required();
}

void add_workers_flag(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--workers", args.workers, "Worker threads")->check(CLI::PositiveNumber);
}

void write_manifest(const fs::path& dir, const nlohmann::json& manifest) {
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

int cmd_optimize(const CommonArgs& args) {
  const auto scenario = load_scenario(args.scenario);
  const auto rows = run_optimize(scenario, args.run_options());
  const auto table = to_table(rows);
  if (args.out.empty()) {
    std::cout << write_csv(table);
  } else {
    fs::create_directories(args.out);
    write_csv_file(fs::path(args.out) / "optimize.csv", table);
    write_manifest(args.out, make_manifest(scenario, args.run_options(), "optimize", {"optimize.csv"}));
  }
  return all_ok(rows) ? 0 : 1;
}

int cmd_simulate(const CommonArgs& args, const std::string& params) {
  const auto scenario = load_scenario(args.scenario);
  if (!scenario.sim) throw ConfigError(fmt::format("{}: scenario has no sim block", args.scenario));
  const auto optimized = params.empty() ? run_optimize(scenario, args.run_options())
                                        : optimize_rows_from(read_csv_file(params));
  const auto rows = run_simulate(scenario, optimized, args.run_options());
  const auto table = to_table(rows);
  if (args.out.empty()) {
    std::cout << write_csv(table);
  } else {
    fs::create_directories(args.out);
    write_csv_file(fs::path(args.out) / "simulate.csv", table);
    write_manifest(args.out, make_manifest(scenario, args.run_options(), "simulate", {"simulate.csv"}));
  }
  return all_ok(rows) ? 0 : 1;
}

int cmd_sweep(const CommonArgs& args) {
  const auto scenario = load_scenario(args.scenario);
  const auto out = run_sweep(scenario, args.out, args.run_options());
  fmt::print("wrote {} optimize rows and {} simulate rows to {}\n", out.optimize.size(), out.simulate.size(),
             args.out);
  return all_ok(out.optimize) && all_ok(out.simulate) ? 0 : 1;
}

int cmd_validate(const CommonArgs& args, std::vector<int> criteria, bool mutate_hessian, bool quiet) {
  if (!args.scenario.empty()) {
    const auto s = load_scenario(args.scenario);
    fmt::print("scenario {} parsed: {} goal pieces, {} node counts\n", s.name, s.goal.size(), s.n_list.size());
  }
  if (criteria.empty()) criteria = criterion_ids();
  ValidationOptions opts;
  opts.mutate_hessian = mutate_hessian;
  opts.workers = args.workers;
  int failures = 0;
  for (int id : criteria) {
    const auto r = run_criterion(id, opts);
    fmt::print("{}", format_result(r, !quiet));
    std::fflush(stdout);
    if (!r.passed) ++failures;
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"GORA optimizer and slotted-channel simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  CommonArgs opt_args, sim_args, sweep_args, val_args;

  auto* optimize = app.add_subcommand("optimize", "Optimal (b, tau, Gamma) per node count and policy");
  add_scenario_flag(optimize, opt_args, true);
  optimize->add_option("--out", opt_args.out, "Output directory (default: CSV on stdout)");
  add_workers_flag(optimize, opt_args);

  std::string params;
  auto* simulate = app.add_subcommand("simulate", "Simulate the optimized policies");
  add_scenario_flag(simulate, sim_args, true);
  simulate->add_option("--out", sim_args.out, "Output directory (default: CSV on stdout)");
  simulate->add_option("--params", params, "Reuse an optimize.csv instead of re-optimizing")->check(CLI::ExistingFile);
  add_workers_flag(simulate, sim_args);
  simulate->add_option("--seed-override", sim_args.seed_override, "Replace the scenario's seed list");

  auto* sweep = app.add_subcommand("sweep", "optimize + simulate, written with a manifest");
  add_scenario_flag(sweep, sweep_args, true);
  sweep->add_option("--out", sweep_args.out, "Output directory")->required();
  add_workers_flag(sweep, sweep_args);
  sweep->add_option("--seed-override", sweep_args.seed_override, "Replace the scenario's seed list");

  std::vector<int> criteria;
  bool mutate_hessian = false, quiet = false;
  auto* validate = app.add_subcommand("validate", "Run the acceptance checks");
  add_scenario_flag(validate, val_args, false);
  validate->add_option("--criterion", criteria, "Run only these criteria (repeatable)")->check(CLI::Range(1, 9));
  add_workers_flag(validate, val_args);
  validate->add_flag("--mutate-hessian", mutate_hessian, "Dev only: perturb the Hessian to see the check fail");
  validate->add_flag("--quiet", quiet, "One line per criterion");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*optimize) return cmd_optimize(opt_args);
    if (*simulate) return cmd_simulate(sim_args, params);
    if (*sweep) return cmd_sweep(sweep_args);
    if (*validate) return cmd_validate(val_args, criteria, mutate_hessian, quiet);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const gora::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
