#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "gora/workflow/csv.hpp"
#include "gora/workflow/records.hpp"
#include "gora/workflow/scenario.hpp"
#include "gora/workflow/sweep.hpp"
#include "gora/workflow/validation.hpp"

using namespace gora;
using namespace gora::workflow;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"name": "t", "goal": {"pieces": [{"start_age": 0, "coefficients": [7]}]}, "n_list": [10]})";

std::string with(const std::string& extra) {
  return R"({"name": "t", "goal": {"pieces": [{"start_age": 0, "coefficients": [7]}]}, "n_list": [10], )" + extra + "}";
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("scenario parsing accepts the documented forms") {
  const auto s = parse_scenario_text(kMinimal);
  CHECK(s.name == "t");
  CHECK(s.d == 1.0);
  CHECK(s.n_list == std::vector<int>{10});
  CHECK(s.policies.size() == 3);
  CHECK_FALSE(s.sim.has_value());

  const auto r = parse_scenario_text(R"({"name": "r", "goal": {"pieces": [{"start_age": 0, "coefficients": [7]}]},
                                        "n_list": {"from": 500, "to": 2500, "step": 500}})");
  CHECK(r.n_list == std::vector<int>{500, 1000, 1500, 2000, 2500});

  const auto p = parse_scenario_text(with(R"("policies": ["TA", "GORA"], "sim": {"seeds": [3, 4], "horizon": 1000, "warmup": 0})"));
  CHECK(p.policies == std::vector<Policy>{Policy::gora, Policy::threshold_aloha});
  CHECK(p.richest_policy() == Policy::gora);
  REQUIRE(p.sim);
  CHECK(p.sim->seeds == std::vector<std::uint64_t>{3, 4});
}

TEST_CASE("scenario parsing is strict") {
  CHECK_THROWS_WITH_AS(parse_scenario_text(with(R"("colour": 1)")), doctest::Contains("unknown key 'colour'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario_text(with(R"("optimizer": {"tau_low": 1})")), doctest::Contains("unknown key"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario_text(with(R"("sim": {"seed": [1]})")), doctest::Contains("unknown key 'seed'"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"name": "t", "goal": {"pieces": [{"start_age": 0, "coefficients": [7]}]},
                                              "n_list": []})"),
                       doctest::Contains("n_list is empty"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_scenario_text(R"({"name": "t", "goal": {"pieces": [{"start_age": 0, "coefficients": [7]}]},
                                              "n_list": {"from": 5, "to": 1, "step": 1}})"),
                       doctest::Contains("n_list is empty"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_text(R"({"name": "t", "n_list": [1]})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_text(with(R"("policies": ["CSMA"])")), ConfigError);
  CHECK_THROWS_AS(parse_scenario_text(with(R"("d": 0)")), ConfigError);
  CHECK_THROWS_AS(parse_scenario_text("{not json"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_scenario_text(R"({"name": "t", "goal": {"pieces": [{"start_age": 0, "coefficients": [0, -1]}]}, "n_list": [1]})"),
      doctest::Contains("tail not eventually non-decreasing"), ConfigError);
}

TEST_CASE("missing scenario files are reported with their path") {
  CHECK_THROWS_WITH_AS(load_scenario("/nonexistent/dir/x.json"), doctest::Contains("/nonexistent/dir/x.json"),
                       ConfigError);
}

TEST_CASE("scenario echo parses back to the same scenario") {
  for (const auto& [name, text] : builtin_scenario_texts()) {
    const auto s = parse_scenario_text(std::string(text));
    const auto again = parse_scenario(to_json(s));
    CHECK(to_json(again) == to_json(s));
  }
}

TEST_CASE("built-in scenarios are the files under scenarios/") {
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(GORA_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++files;
    const auto name = entry.path().stem().string();
    const auto from_file = load_scenario(entry.path());
    CHECK(from_file.name == name);
    CHECK(to_json(builtin_scenario(name)) == to_json(from_file));
  }
  CHECK(files == builtin_scenario_texts().size());
  CHECK_THROWS(builtin_scenario("no_such_scenario"));
}

TEST_CASE("CSV quoting and exact double round-trip") {
  CsvTable t;
  t.header = {"a", "b,c", "d"};
  t.rows = {{"plain", "with \"quote\"", "line\nbreak"}, {"", "x", "1.5"}};
  const auto text = write_csv(t);
  CHECK(text.find("\"b,c\"") != std::string::npos);
  CHECK(text.find("\"with \"\"quote\"\"\"") != std::string::npos);
  const auto back = parse_csv(text);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);

  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0, std::numeric_limits<double>::denorm_min()}) {
    CHECK(parse_double(format_double(v), "x") == v);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK_THROWS_AS(parse_double("abc", "x"), CsvError);
  CHECK_THROWS_AS(parse_csv("a,b\n1\n"), CsvError);
}

TEST_CASE("row tables round-trip and check their header") {
  OptimizeRow o;
  o.n = 10;
  o.policy = Policy::threshold_aloha;
  o.b_star = 0;
  o.gamma_star = 12;
  o.tau_star = 0.123456789012345678;
  o.L_star = 1.0 / 7.0;
  o.message = "a, \"b\"";
  const std::vector<OptimizeRow> rows{o};
  CHECK(optimize_rows_from(parse_csv(write_csv(to_table(rows)))) == rows);

  SimulateRow s;
  s.n = 10;
  s.seed = 18446744073709551615ULL;
  s.digest = 0xdeadbeefcafef00dULL;
  s.time_avg_penalty = 2.0 / 3.0;
  const std::vector<SimulateRow> srows{s};
  CHECK(simulate_rows_from(parse_csv(write_csv(to_table(srows)))) == srows);

  auto bad = to_table(rows);
  bad.header[0] = "N";
  CHECK_THROWS_AS(optimize_rows_from(bad), CsvError);
  CHECK(to_table(rows).header == optimize_columns());
}

TEST_CASE("constant scenario: optimize and simulate rows") {
  const auto s = builtin_scenario("constant");
  const auto opt = run_optimize(s, {});
  REQUIRE(opt.size() == s.n_list.size() * s.policies.size());
  for (const auto& r : opt) {
    CHECK(r.status == "ok");
    CHECK(r.L_star == doctest::Approx(7.0));
    CHECK(r.b_star == 0);
    CHECK(r.gamma_star == 0);
  }
  const auto sim = run_simulate(s, opt, {});
  REQUIRE(sim.size() == opt.size() * s.sim->seeds.size());
  for (const auto& r : sim) {
    CHECK(r.status == "ok");
    CHECK(r.time_avg_penalty == 7.0);
  }
}

TEST_CASE("sweep output does not depend on the worker count") {
  const auto s = builtin_scenario("convex_small");
  const auto d1 = fresh_dir("gora_sweep_w1"), d3 = fresh_dir("gora_sweep_w3");
  RunOptions one, three;
  three.workers = 3;
  const auto a = run_sweep(s, d1, one);
  const auto b = run_sweep(s, d3, three);
  CHECK(a.optimize == b.optimize);
  CHECK(a.simulate == b.simulate);
  CHECK(read_file(d1 / "optimize.csv") == read_file(d3 / "optimize.csv"));
  CHECK(read_file(d1 / "simulate.csv") == read_file(d3 / "simulate.csv"));
  CHECK(read_file(d1 / "manifest.json") == read_file(d3 / "manifest.json"));

  // rows are ordered by (n, policy, seed)
  for (std::size_t i = 1; i < a.simulate.size(); ++i) {
    const auto& p = a.simulate[i - 1];
    const auto& q = a.simulate[i];
    CHECK(std::tuple(p.n, static_cast<int>(p.policy), p.seed) < std::tuple(q.n, static_cast<int>(q.policy), q.seed));
  }

  const auto m = nlohmann::json::parse(read_file(d1 / "manifest.json"));
  CHECK(m["tool"] == "gora");
  CHECK(m["csv_schema_version"] == kCsvSchemaVersion);
  CHECK(m["command"] == "sweep");
  CHECK(m["seeds"] == nlohmann::json(s.sim->seeds));
  CHECK(m["scenario"] == to_json(s));
  CHECK(m["seed_override"].is_null());
  CHECK(m["files"] == nlohmann::json({"optimize.csv", "simulate.csv"}));

  // the CSV files read back into the same rows
  CHECK(optimize_rows_from(read_csv_file(d1 / "optimize.csv")) == a.optimize);
  CHECK(simulate_rows_from(read_csv_file(d1 / "simulate.csv")) == a.simulate);
  fs::remove_all(d1);
  fs::remove_all(d3);
}

TEST_CASE("seed override replaces the seed list") {
  const auto s = builtin_scenario("constant");
  RunOptions o;
  o.seed_override = 99;
  CHECK(effective_seeds(s, o) == std::vector<std::uint64_t>{99});
  const auto m = make_manifest(s, o, "simulate", {"simulate.csv"});
  CHECK(m["seed_override"] == 99);
  CHECK(m["scenario"]["sim"]["seeds"] == nlohmann::json({99}));
}

TEST_CASE("scenarios without a sim block cannot be simulated") {
  const auto s = builtin_scenario("monotone_linear");
  CHECK_THROWS_AS(run_simulate(s, {}, {}), ConfigError);
}

TEST_CASE("failed optimizer rows are skipped by the simulator") {
  const auto s = builtin_scenario("constant");
  OptimizeRow bad;
  bad.n = 10;
  bad.status = "solver_error";
  const auto rows = run_simulate(s, {bad}, {});
  REQUIRE(rows.size() == s.sim->seeds.size());
  CHECK(rows[0].status == "skipped");
  CHECK_FALSE(all_ok(rows));
}

TEST_CASE("criterion ids and result formatting") {
  CHECK(criterion_ids() == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  CheckResult r{7, "title", true, 0.5, 10, {"detail"}};
  const auto text = format_result(r);
  CHECK(text.rfind("PASS", 0) == 0);
  CHECK(text.find("detail") != std::string::npos);
  CHECK(format_result(r, false).find("detail") == std::string::npos);
}

TEST_CASE("the Hessian check catches a perturbed Hessian") {
  ValidationOptions opts;
  CHECK(run_criterion(2, opts).passed);
  opts.mutate_hessian = true;
  CHECK_FALSE(run_criterion(2, opts).passed);
}
