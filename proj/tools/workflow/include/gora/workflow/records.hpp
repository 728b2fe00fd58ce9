#pragma once

// Result rows emitted by the optimize and simulate workflows, and their CSV
// tables. Schemas are versioned by kCsvSchemaVersion (recorded in every
// manifest); floating-point fields use 17 significant digits so a parse of an
// emitted table reproduces the records exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "gora/optimizer.hpp"
#include "gora/workflow/csv.hpp"

namespace gora::workflow {

inline constexpr int kCsvSchemaVersion = 1;

struct OptimizeRow {
  int n = 0;
  Policy policy = Policy::gora;
  std::string status = "ok";  // "ok" or the failing error class
  std::int64_t b_star = 0;
  std::int64_t gamma_star = 0;
  double tau_star = 0.0;
  double ps = 0.0;
  double L_star = 0.0;
  double f1 = 0.0;  // at the continuous solution
  double f2 = 0.0;
  double end_of_cycle_penalty = 0.0;
  double h_start = 0.0;  // h((b*+1)d), the start-of-cycle penalty
  double b_cont = 0.0;
  double gamma_cont = 0.0;
  std::string convexity;
  std::string corollary2;
  std::string message;

  bool operator==(const OptimizeRow&) const = default;
};

struct SimulateRow {
  int n = 0;
  Policy policy = Policy::gora;
  std::uint64_t seed = 0;
  std::string status = "ok";
  std::int64_t b = 0;
  std::int64_t gamma = 0;
  double tau = 0.0;
  std::int64_t measured_slots = 0;
  double time_avg_penalty = 0.0;
  double stderr_penalty = 0.0;
  double empirical_ps = 0.0;
  double predicted_ps = 0.0;
  double L_at_empirical_ps = 0.0;
  std::uint64_t renewals = 0;
  std::string stationarity;
  double ps_cv = 0.0;
  std::uint64_t digest = 0;
  std::string message;

  bool operator==(const SimulateRow&) const = default;
};

const std::vector<std::string>& optimize_columns();
const std::vector<std::string>& simulate_columns();

CsvTable to_table(const std::vector<OptimizeRow>& rows);
CsvTable to_table(const std::vector<SimulateRow>& rows);

/// Throw CsvError when the header differs from the schema or a field does not parse.
std::vector<OptimizeRow> optimize_rows_from(const CsvTable& table);
std::vector<SimulateRow> simulate_rows_from(const CsvTable& table);

OptimizeRow make_optimize_row(const OptimizationResult& result);

}  // namespace gora::workflow
