#pragma once

// Scenario files: JSON documents describing one experiment (goal, node counts,
// policies, optimizer options and an optional simulation block). Parsing is
// strict: unknown keys and wrong types are errors.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gora/errors.hpp"
#include "gora/goal.hpp"
#include "gora/optimizer.hpp"

namespace gora::workflow {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct GoalPiece {
  double start_age = 0.0;
  std::vector<double> coefficients;  // ascending powers of (age - start_age)
};

struct SimBlock {
  std::int64_t horizon = 1'000'000;
  std::int64_t warmup = 100'000;
  std::vector<std::uint64_t> seeds{1};
  int batches = 64;
  std::int64_t ps_window = 0;
  bool event_log = false;
  bool event_log_gzip = true;
};

struct Scenario {
  std::string name;
  std::vector<GoalPiece> goal;
  double d = 1.0;
  std::vector<int> n_list;
  std::vector<Policy> policies;  // canonical order GORA, TA, SA
  OptimizerOptions optimizer;
  std::optional<SimBlock> sim;

  GoalFunction build_goal() const;
  /// Richest requested policy; optimize_policies solves up to it.
  Policy richest_policy() const;
};

Scenario parse_scenario(const nlohmann::json& doc);
Scenario parse_scenario_text(const std::string& text);
/// Throws ConfigError naming the path when the file is missing or malformed.
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical JSON form (every option spelled out); parse_scenario(to_json(s)) == s.
nlohmann::json to_json(const Scenario& scenario);

}  // namespace gora::workflow
