#pragma once

// optimize / simulate / sweep workflows over a scenario. Work fans out across a
// bounded pool of worker threads; rows come back ordered by (n, policy, seed)
// whatever the completion order, so outputs do not depend on the worker count.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gora/workflow/records.hpp"
#include "gora/workflow/scenario.hpp"

namespace gora::workflow {

/// Runs task(i) for i in [0, count) on min(workers, count) threads. The first
/// exception thrown by a task is rethrown after all threads have joined.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task);

struct RunOptions {
  int workers = 1;
  std::optional<std::uint64_t> seed_override;  // replaces the scenario's seed list
  std::optional<std::filesystem::path> event_log_dir;
};

/// One row per (n, requested policy). Solver failures become rows with status != "ok".
std::vector<OptimizeRow> run_optimize(const Scenario& scenario, const RunOptions& options);

/// Needs scenario.sim. Simulates every ok row of `optimized` for each seed.
std::vector<SimulateRow> run_simulate(const Scenario& scenario, const std::vector<OptimizeRow>& optimized,
                                      const RunOptions& options);

std::vector<std::uint64_t> effective_seeds(const Scenario& scenario, const RunOptions& options);

nlohmann::json make_manifest(const Scenario& scenario, const RunOptions& options, const std::string& command,
                             const std::vector<std::string>& files);

struct SweepOutput {
  std::vector<OptimizeRow> optimize;
  std::vector<SimulateRow> simulate;
  nlohmann::json manifest;
};

/// Writes optimize.csv, simulate.csv (when the scenario has a sim block) and manifest.json into out_dir.
SweepOutput run_sweep(const Scenario& scenario, const std::filesystem::path& out_dir, const RunOptions& options);

bool all_ok(const std::vector<OptimizeRow>& rows);
bool all_ok(const std::vector<SimulateRow>& rows);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace gora::workflow
