#include "gora/workflow/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace gora::workflow {

namespace {

using nlohmann::json;

// Reads the members of one JSON object and rejects any key nobody asked for.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where_));
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }

  const json& at(const std::string& key) {
    if (!has(key)) throw ConfigError(fmt::format("{}: missing required key '{}'", where_, key));
    return obj_.at(key);
  }

  double number(const std::string& key) { return as_number(at(key), path(key)); }
  double number_or(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key) { return as_integer(at(key), path(key)); }
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) { return has(key) ? integer(key) : fallback; }

  std::string string(const std::string& key) {
    const auto& v = at(key);
    if (!v.is_string()) throw ConfigError(fmt::format("{}: expected a string", path(key)));
    return v.get<std::string>();
  }

  bool boolean_or(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(fmt::format("{}: expected true or false", path(key)));
    return v.get<bool>();
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, key));
    }
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ConfigError(fmt::format("{}: expected a number", where));
    return v.get<double>();
  }

  static std::int64_t as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) throw ConfigError(fmt::format("{}: expected an integer", where));
    return v.get<std::int64_t>();
  }

 private:
  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

std::vector<int> parse_n_list(const json& v, const std::string& where) {
  std::vector<int> out;
  if (v.is_array()) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(static_cast<int>(Fields::as_integer(v[i], fmt::format("{}[{}]", where, i))));
    }
  } else if (v.is_object()) {
    Fields f(v, where);
    const auto from = f.integer("from");
    const auto to = f.integer("to");
    const auto step = f.integer("step");
    f.finish();
    if (step <= 0) throw ConfigError(fmt::format("{}.step: must be positive", where));
    for (auto n = from; n <= to; n += step) out.push_back(static_cast<int>(n));
  } else {
    throw ConfigError(fmt::format("{}: expected a list of node counts or {{from, to, step}}", where));
  }
  if (out.empty()) throw ConfigError(fmt::format("{}: n_list is empty", where));
  for (int n : out) {
    if (n < 1) throw ConfigError(fmt::format("{}: node counts must be positive (got {})", where, n));
  }
  return out;
}

OptimizerOptions parse_optimizer(const json& v) {
  OptimizerOptions o;
  Fields f(v, "optimizer");
  if (f.has("ps_mode")) {
    try {
      o.ps_mode = parse_ps_mode(f.string("ps_mode"));
    } catch (const Error& e) {
      throw ConfigError(fmt::format("optimizer.ps_mode: {}", e.what()));
    }
  }
  o.frozen_gamma = f.number_or("frozen_gamma", o.frozen_gamma);
  o.tau_lo = f.number_or("tau_lo", o.tau_lo);
  o.tau_hi = f.number_or("tau_hi", o.tau_hi);
  o.tau_scan_points = static_cast<int>(f.integer_or("tau_scan_points", o.tau_scan_points));
  o.max_bracket_expansions = static_cast<int>(f.integer_or("max_bracket_expansions", o.max_bracket_expansions));
  o.tau_rel_tol = f.number_or("tau_rel_tol", o.tau_rel_tol);
  o.residual_tol = f.number_or("residual_tol", o.residual_tol);
  o.max_newton = static_cast<int>(f.integer_or("max_newton", o.max_newton));
  o.max_starts = static_cast<int>(f.integer_or("max_starts", o.max_starts));
  o.series.tail_mass = f.number_or("tail_mass", o.series.tail_mass);
  f.finish();
  if (!(o.tau_lo > 0.0 && o.tau_hi > o.tau_lo)) throw ConfigError("optimizer: need 0 < tau_lo < tau_hi");
  if (o.tau_scan_points < 3) throw ConfigError("optimizer.tau_scan_points: must be at least 3");
  if (!(o.series.tail_mass > 0.0 && o.series.tail_mass < 1e-3)) {
    throw ConfigError("optimizer.tail_mass: must lie in (0, 1e-3)");
  }
  if (o.frozen_gamma < 0.0) throw ConfigError("optimizer.frozen_gamma: must be >= 0");
  return o;
}

SimBlock parse_sim(const json& v) {
  SimBlock s;
  Fields f(v, "sim");
  s.horizon = f.integer_or("horizon", s.horizon);
  s.warmup = f.integer_or("warmup", s.warmup);
  if (f.has("seeds")) {
    const auto& seeds = f.at("seeds");
    if (!seeds.is_array() || seeds.empty()) throw ConfigError("sim.seeds: expected a non-empty list");
    s.seeds.clear();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (!seeds[i].is_number_unsigned()) {
        throw ConfigError(fmt::format("sim.seeds[{}]: expected a non-negative integer", i));
      }
      s.seeds.push_back(seeds[i].get<std::uint64_t>());
    }
  }
  s.batches = static_cast<int>(f.integer_or("batches", s.batches));
  s.ps_window = f.integer_or("ps_window", s.ps_window);
  s.event_log = f.boolean_or("event_log", s.event_log);
  s.event_log_gzip = f.boolean_or("event_log_gzip", s.event_log_gzip);
  f.finish();
  if (!(s.horizon > s.warmup && s.warmup >= 0)) throw ConfigError("sim: need horizon > warmup >= 0");
  if (s.batches < 2) throw ConfigError("sim.batches: must be at least 2");
  if (s.ps_window < 0) throw ConfigError("sim.ps_window: must be >= 0");
  return s;
}

}  // namespace

GoalFunction Scenario::build_goal() const {
  std::vector<double> starts;
  std::vector<std::vector<double>> pieces;
  for (const auto& p : goal) {
    starts.push_back(p.start_age);
    pieces.push_back(p.coefficients);
  }
  return make_goal(std::move(starts), std::move(pieces));
}

Policy Scenario::richest_policy() const {
  Policy best = Policy::slotted_aloha;
  for (Policy p : policies) {
    if (static_cast<int>(p) < static_cast<int>(best)) best = p;
  }
  return best;
}

Scenario parse_scenario(const nlohmann::json& doc) {
  Scenario s;
  Fields f(doc, "scenario");
  s.name = f.string("name");
  if (s.name.empty()) throw ConfigError("scenario.name: must not be empty");

  Fields g(f.at("goal"), "goal");
  const auto& pieces = g.at("pieces");
  if (!pieces.is_array() || pieces.empty()) throw ConfigError("goal.pieces: expected a non-empty list");
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const auto where = fmt::format("goal.pieces[{}]", i);
    Fields p(pieces[i], where);
    GoalPiece piece;
    piece.start_age = p.number("start_age");
    const auto& c = p.at("coefficients");
    if (!c.is_array()) throw ConfigError(fmt::format("{}.coefficients: expected a list of numbers", where));
    for (std::size_t k = 0; k < c.size(); ++k) {
      piece.coefficients.push_back(Fields::as_number(c[k], fmt::format("{}.coefficients[{}]", where, k)));
    }
    p.finish();
    s.goal.push_back(std::move(piece));
  }
  g.finish();

  s.d = f.number_or("d", s.d);
  if (!(s.d > 0.0)) throw ConfigError("scenario.d: slot duration must be positive");
  s.n_list = parse_n_list(f.at("n_list"), "scenario.n_list");

  if (f.has("policies")) {
    const auto& list = f.at("policies");
    if (!list.is_array() || list.empty()) throw ConfigError("scenario.policies: expected a non-empty list");
    std::set<Policy> chosen;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_string()) throw ConfigError(fmt::format("scenario.policies[{}]: expected a string", i));
      try {
        chosen.insert(parse_policy(list[i].get<std::string>()));
      } catch (const Error& e) {
        throw ConfigError(fmt::format("scenario.policies[{}]: {}", i, e.what()));
      }
    }
    s.policies.assign(chosen.begin(), chosen.end());
  } else {
    s.policies = {Policy::gora, Policy::threshold_aloha, Policy::slotted_aloha};
  }

  if (f.has("optimizer")) s.optimizer = parse_optimizer(f.at("optimizer"));
  if (f.has("sim")) s.sim = parse_sim(f.at("sim"));
  f.finish();

  try {
    (void)s.build_goal();
  } catch (const Error& e) {
    throw ConfigError(fmt::format("goal: {}", e.what()));
  }
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("scenario is not valid JSON: {}", e.what()));
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open scenario file '{}'", path.string()));
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_scenario_text(text.str());
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

nlohmann::json to_json(const Scenario& s) {
  using nlohmann::json;
  json pieces = json::array();
  for (const auto& p : s.goal) pieces.push_back({{"start_age", p.start_age}, {"coefficients", p.coefficients}});
  json policies = json::array();
  for (Policy p : s.policies) policies.push_back(to_string(p));
  const auto& o = s.optimizer;
  json doc = {
      {"name", s.name},
      {"goal", {{"pieces", pieces}}},
      {"d", s.d},
      {"n_list", s.n_list},
      {"policies", policies},
      {"optimizer",
       {{"ps_mode", to_string(o.ps_mode)},
        {"frozen_gamma", o.frozen_gamma},
        {"tau_lo", o.tau_lo},
        {"tau_hi", o.tau_hi},
        {"tau_scan_points", o.tau_scan_points},
        {"max_bracket_expansions", o.max_bracket_expansions},
        {"tau_rel_tol", o.tau_rel_tol},
        {"residual_tol", o.residual_tol},
        {"max_newton", o.max_newton},
        {"max_starts", o.max_starts},
        {"tail_mass", o.series.tail_mass}}},
  };
  if (s.sim) {
    doc["sim"] = {{"horizon", s.sim->horizon},     {"warmup", s.sim->warmup},
                  {"seeds", s.sim->seeds},         {"batches", s.sim->batches},
                  {"ps_window", s.sim->ps_window}, {"event_log", s.sim->event_log},
                  {"event_log_gzip", s.sim->event_log_gzip}};
  }
  return doc;
}

}  // namespace gora::workflow
