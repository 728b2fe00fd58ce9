#pragma once

// The acceptance suite: one check per criterion, shared by `gora validate`
// and the acceptance test binary.

#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gora/renewal.hpp"
#include "gora/workflow/scenario.hpp"

namespace gora::workflow {

/// Scenario files under scenarios/, compiled into the library.
const std::vector<std::pair<std::string_view, std::string_view>>& builtin_scenario_texts();
Scenario builtin_scenario(std::string_view name);

using HessianFn = std::function<HessianEvaluation(const GoalFunction&, const PolicyParams&, const ChannelModel&)>;

struct ValidationOptions {
  /// Dev-only mutation test: scales the first Hessian entry by (1 + 1e-3).
  bool mutate_hessian = false;
  int workers = 1;
};

struct CheckResult {
  int id = 0;
  std::string title;
  bool passed = false;
  double seconds = 0.0;
  double budget_seconds = 0.0;
  std::vector<std::string> details;
};

std::vector<int> criterion_ids();
CheckResult run_criterion(int id, const ValidationOptions& options = {});

/// "PASS  criterion 3: title (1.2 s of 30 s)" plus indented detail lines.
std::string format_result(const CheckResult& result, bool with_details = true);

}  // namespace gora::workflow
