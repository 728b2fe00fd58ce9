#include "gora/workflow/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "gora/event_log.hpp"
#include "gora/renewal.hpp"
#include "gora/simulator.hpp"

namespace gora::workflow {

namespace {

std::string error_status(const std::exception& e) {
  if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence_error";
  if (dynamic_cast<const PrecisionError*>(&e)) return "precision_error";
  if (dynamic_cast<const SolverError*>(&e)) return "solver_error";
  if (dynamic_cast<const DomainError*>(&e)) return "domain_error";
  if (dynamic_cast<const InvariantError*>(&e)) return "invariant_error";
  if (dynamic_cast<const RangeError*>(&e)) return "range_error";
  return "error";
}

bool requested(const Scenario& s, Policy p) {
  return std::find(s.policies.begin(), s.policies.end(), p) != s.policies.end();
}

}  // namespace

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  const auto threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<OptimizeRow> run_optimize(const Scenario& scenario, const RunOptions& options) {
  const auto h = scenario.build_goal();
  OptimizerOptions opts = scenario.optimizer;
  opts.policy = scenario.richest_policy();

  std::vector<std::vector<OptimizeRow>> per_n(scenario.n_list.size());
  parallel_for(scenario.n_list.size(), options.workers, [&](std::size_t i) {
    const int n = scenario.n_list[i];
    auto& rows = per_n[i];
    try {
      spdlog::debug("optimize: scenario {} n={}", scenario.name, n);
      for (const auto& r : optimize_policies(h, n, scenario.d, opts)) {
        if (requested(scenario, r.policy)) rows.push_back(make_optimize_row(r));
      }
    } catch (const Error& e) {
      spdlog::warn("optimize: scenario {} n={} failed: {}", scenario.name, n, e.what());
      rows.clear();
      for (Policy p : scenario.policies) {
        OptimizeRow row;
        row.n = n;
        row.policy = p;
        row.status = error_status(e);
        row.message = e.what();
        rows.push_back(row);
      }
    }
  });

  std::vector<OptimizeRow> out;
  for (auto& rows : per_n) out.insert(out.end(), rows.begin(), rows.end());
  std::stable_sort(out.begin(), out.end(), [](const OptimizeRow& a, const OptimizeRow& b) {
    return std::pair(a.n, static_cast<int>(a.policy)) < std::pair(b.n, static_cast<int>(b.policy));
  });
  return out;
}

std::vector<std::uint64_t> effective_seeds(const Scenario& scenario, const RunOptions& options) {
  if (options.seed_override) return {*options.seed_override};
  if (!scenario.sim) return {};
  return scenario.sim->seeds;
}

std::vector<SimulateRow> run_simulate(const Scenario& scenario, const std::vector<OptimizeRow>& optimized,
                                      const RunOptions& options) {
  if (!scenario.sim) throw ConfigError(fmt::format("scenario '{}' has no sim block", scenario.name));
  const auto& sim = *scenario.sim;
  const auto h = scenario.build_goal();
  const auto seeds = effective_seeds(scenario, options);

  struct Job {
    const OptimizeRow* row;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& row : optimized) {
    for (auto seed : seeds) jobs.push_back({&row, seed});
  }

  std::vector<SimulateRow> out(jobs.size());
  parallel_for(jobs.size(), options.workers, [&](std::size_t i) {
    const auto& opt = *jobs[i].row;
    SimulateRow& row = out[i];
    row.n = opt.n;
    row.policy = opt.policy;
    row.seed = jobs[i].seed;
    row.b = opt.b_star;
    row.gamma = opt.gamma_star;
    row.tau = opt.tau_star;
    row.predicted_ps = opt.ps;
    if (opt.status != "ok") {
      row.status = "skipped";
      row.message = "optimizer row not ok";
      return;
    }
    try {
      SimConfig cfg;
      cfg.n = opt.n;
      cfg.b = opt.b_star;
      cfg.gamma = opt.gamma_star;
      cfg.tau = opt.tau_star;
      cfg.d = scenario.d;
      cfg.horizon = sim.horizon;
      cfg.warmup = sim.warmup;
      cfg.seed = jobs[i].seed;
      cfg.batches = sim.batches;
      cfg.ps_window = sim.ps_window;

      std::unique_ptr<EventLogWriter> log;
      EventSink sink;
      if (sim.event_log && options.event_log_dir) {
        const auto name = fmt::format("events_n{}_{}_seed{}.csv{}", opt.n, to_string(opt.policy), row.seed,
                                      sim.event_log_gzip ? ".gz" : "");
        log = std::make_unique<EventLogWriter>((*options.event_log_dir / name).string(), sim.event_log_gzip);
        sink = [&log](const SlotOutcome& o) { log->write(o); };
      }
      spdlog::debug("simulate: n={} {} seed={}", opt.n, to_string(opt.policy), row.seed);
      const auto stats = run(cfg, h, sink);
      if (log) log->close();

      row.measured_slots = stats.measured_slots;
      row.time_avg_penalty = stats.time_avg_penalty;
      row.stderr_penalty = stats.stderr_penalty;
      row.empirical_ps = stats.empirical_ps;
      row.renewals = stats.successes;
      row.digest = stats.digest;
      const auto report = assumption1_report(stats, opt.ps);
      row.stationarity = report.flag;
      row.ps_cv = report.cv;
      if (stats.no_renewals || !(stats.empirical_ps > 0.0)) {
        row.status = "no_renewals";
        row.message = "no successes recorded during measurement";
        return;
      }
      const PolicyParams params{static_cast<double>(opt.b_star), opt.tau_star, static_cast<double>(opt.gamma_star),
                                scenario.d};
      const auto ch = channel_with_ps(opt.n, opt.tau_star, params.gamma, stats.empirical_ps, PsSource::empirical);
      row.L_at_empirical_ps = expected_penalty(h, params, ch, scenario.optimizer.series).value;
    } catch (const Error& e) {
      spdlog::warn("simulate: n={} {} seed={} failed: {}", opt.n, to_string(opt.policy), row.seed, e.what());
      row.status = error_status(e);
      row.message = e.what();
    }
  });

  std::stable_sort(out.begin(), out.end(), [](const SimulateRow& a, const SimulateRow& b) {
    return std::tuple(a.n, static_cast<int>(a.policy), a.seed) < std::tuple(b.n, static_cast<int>(b.policy), b.seed);
  });
  return out;
}

nlohmann::json make_manifest(const Scenario& scenario, const RunOptions& options, const std::string& command,
                             const std::vector<std::string>& files) {
  auto echo = to_json(scenario);
  const auto seeds = effective_seeds(scenario, options);
  if (scenario.sim && options.seed_override) echo["sim"]["seeds"] = seeds;
  nlohmann::json m = {
      {"tool", "gora"},
      {"tool_version", kToolVersion},
      {"csv_schema_version", kCsvSchemaVersion},
      {"command", command},
      {"scenario", echo},
      {"seeds", seeds},
      {"files", files},
      {"rng", "SplitMix64; node i state = mix64(seed ^ mix64(i + 1)); uniform = (x >> 11) * 2^-53"},
  };
  m["seed_override"] = options.seed_override ? nlohmann::json(*options.seed_override) : nlohmann::json(nullptr);
  return m;
}

SweepOutput run_sweep(const Scenario& scenario, const std::filesystem::path& out_dir, const RunOptions& options) {
  std::filesystem::create_directories(out_dir);
  RunOptions opts = options;
  if (scenario.sim && scenario.sim->event_log && !opts.event_log_dir) opts.event_log_dir = out_dir;

  SweepOutput out;
  std::vector<std::string> files{"optimize.csv"};
  out.optimize = run_optimize(scenario, opts);
  write_csv_file(out_dir / "optimize.csv", to_table(out.optimize));
  if (scenario.sim) {
    out.simulate = run_simulate(scenario, out.optimize, opts);
    write_csv_file(out_dir / "simulate.csv", to_table(out.simulate));
    files.emplace_back("simulate.csv");
  }
  out.manifest = make_manifest(scenario, opts, "sweep", files);
  std::ofstream(out_dir / "manifest.json") << out.manifest.dump(2) << '\n';
  return out;
}

bool all_ok(const std::vector<OptimizeRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.status == "ok"; });
}

bool all_ok(const std::vector<SimulateRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.status == "ok"; });
}

}  // namespace gora::workflow
