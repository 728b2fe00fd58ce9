#include "gora/workflow/records.hpp"

#include <charconv>
#include <functional>

#include <fmt/format.h>

namespace gora::workflow {

namespace {

template <class Row>
struct Column {
  std::string name;
  std::function<std::string(const Row&)> get;
  std::function<void(Row&, const std::string&)> set;
};

template <class Int>
Int parse_int(const std::string& field, const std::string& column) {
  Int v{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end) {
    throw CsvError(fmt::format("column '{}': '{}' is not an integer", column, field));
  }
  return v;
}

Policy parse_policy_field(const std::string& field) {
  try {
    return parse_policy(field);
  } catch (const Error& e) {
    throw CsvError(fmt::format("column 'policy': {}", e.what()));
  }
}

#define GORA_DOUBLE(Row, field)                                                     \
  Column<Row> {                                                                     \
    #field, [](const Row& r) { return format_double(r.field); },                    \
        [](Row& r, const std::string& s) { r.field = parse_double(s, #field); } \
  }
#define GORA_INT(Row, field)                                                                    \
  Column<Row> {                                                                                 \
    #field, [](const Row& r) { return fmt::format("{}", r.field); },                            \
        [](Row& r, const std::string& s) { r.field = parse_int<decltype(r.field)>(s, #field); } \
  }
#define GORA_TEXT(Row, field)                                                \
  Column<Row> {                                                              \
    #field, [](const Row& r) { return r.field; },                            \
        [](Row& r, const std::string& s) { r.field = s; }                    \
  }
#define GORA_POLICY(Row)                                                             \
  Column<Row> {                                                                      \
    "policy", [](const Row& r) { return to_string(r.policy); },                      \
        [](Row& r, const std::string& s) { r.policy = parse_policy_field(s); }       \
  }

const std::vector<Column<OptimizeRow>>& optimize_schema() {
  static const std::vector<Column<OptimizeRow>> cols = {
      GORA_INT(OptimizeRow, n),
      GORA_POLICY(OptimizeRow),
      GORA_TEXT(OptimizeRow, status),
      GORA_INT(OptimizeRow, b_star),
      GORA_INT(OptimizeRow, gamma_star),
      GORA_DOUBLE(OptimizeRow, tau_star),
      GORA_DOUBLE(OptimizeRow, ps),
      GORA_DOUBLE(OptimizeRow, L_star),
      Column<OptimizeRow>{"F1", [](const OptimizeRow& r) { return format_double(r.f1); },
                          [](OptimizeRow& r, const std::string& s) { r.f1 = parse_double(s, "F1"); }},
      Column<OptimizeRow>{"F2", [](const OptimizeRow& r) { return format_double(r.f2); },
                          [](OptimizeRow& r, const std::string& s) { r.f2 = parse_double(s, "F2"); }},
      GORA_DOUBLE(OptimizeRow, end_of_cycle_penalty),
      GORA_DOUBLE(OptimizeRow, h_start),
      GORA_DOUBLE(OptimizeRow, b_cont),
      GORA_DOUBLE(OptimizeRow, gamma_cont),
      GORA_TEXT(OptimizeRow, convexity),
      GORA_TEXT(OptimizeRow, corollary2),
      GORA_TEXT(OptimizeRow, message),
  };
  return cols;
}

const std::vector<Column<SimulateRow>>& simulate_schema() {
  static const std::vector<Column<SimulateRow>> cols = {
      GORA_INT(SimulateRow, n),
      GORA_POLICY(SimulateRow),
      GORA_INT(SimulateRow, seed),
      GORA_TEXT(SimulateRow, status),
      GORA_INT(SimulateRow, b),
      GORA_INT(SimulateRow, gamma),
      GORA_DOUBLE(SimulateRow, tau),
      GORA_INT(SimulateRow, measured_slots),
      GORA_DOUBLE(SimulateRow, time_avg_penalty),
      GORA_DOUBLE(SimulateRow, stderr_penalty),
      GORA_DOUBLE(SimulateRow, empirical_ps),
      GORA_DOUBLE(SimulateRow, predicted_ps),
      GORA_DOUBLE(SimulateRow, L_at_empirical_ps),
      GORA_INT(SimulateRow, renewals),
      GORA_TEXT(SimulateRow, stationarity),
      GORA_DOUBLE(SimulateRow, ps_cv),
      GORA_INT(SimulateRow, digest),
      GORA_TEXT(SimulateRow, message),
  };
  return cols;
}

#undef GORA_DOUBLE
#undef GORA_INT
#undef GORA_TEXT
#undef GORA_POLICY

template <class Row>
std::vector<std::string> names(const std::vector<Column<Row>>& cols) {
  std::vector<std::string> out;
  for (const auto& c : cols) out.push_back(c.name);
  return out;
}

template <class Row>
CsvTable tabulate(const std::vector<Column<Row>>& cols, const std::vector<Row>& rows) {
  CsvTable t;
  t.header = names(cols);
  for (const auto& row : rows) {
    auto& out = t.rows.emplace_back();
    for (const auto& c : cols) out.push_back(c.get(row));
  }
  return t;
}

template <class Row>
std::vector<Row> untabulate(const std::vector<Column<Row>>& cols, const CsvTable& t, const char* what) {
  if (t.header != names(cols)) {
    throw CsvError(fmt::format("{} table: header does not match schema version {}", what, kCsvSchemaVersion));
  }
  std::vector<Row> rows;
  for (const auto& fields : t.rows) {
    Row& r = rows.emplace_back();
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i].set(r, fields[i]);
  }
  return rows;
}

}  // namespace

const std::vector<std::string>& optimize_columns() {
  static const auto cols = names(optimize_schema());
  return cols;
}

const std::vector<std::string>& simulate_columns() {
  static const auto cols = names(simulate_schema());
  return cols;
}

CsvTable to_table(const std::vector<OptimizeRow>& rows) { return tabulate(optimize_schema(), rows); }
CsvTable to_table(const std::vector<SimulateRow>& rows) { return tabulate(simulate_schema(), rows); }

std::vector<OptimizeRow> optimize_rows_from(const CsvTable& table) {
  return untabulate(optimize_schema(), table, "optimize");
}

std::vector<SimulateRow> simulate_rows_from(const CsvTable& table) {
  return untabulate(simulate_schema(), table, "simulate");
}

OptimizeRow make_optimize_row(const OptimizationResult& r) {
  OptimizeRow row;
  row.n = r.n;
  row.policy = r.policy;
  row.status = r.status;
  row.b_star = r.b_star;
  row.gamma_star = r.gamma_star;
  row.tau_star = r.tau_star;
  row.ps = r.ps_star;
  row.L_star = r.L_star;
  row.f1 = r.continuous.f1;
  row.f2 = r.continuous.f2;
  row.end_of_cycle_penalty = r.end_of_cycle_penalty;
  row.h_start = r.h_start;
  row.b_cont = r.continuous.b;
  row.gamma_cont = r.continuous.gamma;
  row.convexity = r.convexity.verdict;
  row.corollary2 = to_string(r.corollary2.flag);
  return row;
}

}  // namespace gora::workflow
