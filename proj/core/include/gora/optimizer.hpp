#pragma once

// Joint search over staleness b, back-off Gamma (integers) and transmit
// probability tau for the GORA policy and its restrictions:
//   TA (threshold ALOHA): b = 0
//   SA (slotted ALOHA):   b = 0, Gamma = 0
//
// For a fixed tau the continuous relaxation in (b, Gamma) is solved by
// projected damped Newton on the stationarity conditions from several starts;
// the outer tau search is a coarse scan followed by golden-section refinement.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gora/goal.hpp"
#include "gora/renewal.hpp"

namespace gora {

enum class Policy { gora, threshold_aloha, slotted_aloha };

std::string to_string(Policy policy);
Policy parse_policy(std::string_view name);  // "GORA", "TA", "SA"

enum class PsMode {
  // p_s recomputed from the steady-state fixed point at every evaluated Gamma;
  // the Gamma condition includes dL/dp_s * dp_s/dGamma.
  self_consistent,
  // p_s frozen per tau (evaluated at frozen_gamma); Gamma and b solve F1 = F2 = 0.
  frozen,
};

std::string to_string(PsMode mode);
PsMode parse_ps_mode(std::string_view name);

struct OptimizerOptions {
  Policy policy = Policy::gora;
  PsMode ps_mode = PsMode::self_consistent;
  double frozen_gamma = 0.0;
  double tau_lo = 0.2;  // tau bracket, in units of 1/n
  double tau_hi = 5.0;
  int tau_scan_points = 9;
  int max_bracket_expansions = 8;
  double tau_rel_tol = 1e-6;
  double residual_tol = 1e-10;  // relative to max(1, |L|)
  int max_newton = 80;
  int max_starts = 4;
  SeriesControl series;
};

struct StationaryPoint {
  double b = 0.0;
  double gamma = 0.0;
  double ps = 0.0;
  double L = 0.0;
  double f1 = 0.0;  // E[h(end)] - h(start)
  double f2 = 0.0;  // E[h(end)] - L
  double g = 0.0;   // (Gamma + E[Y]) dJ/dGamma; equals f2 when p_s is frozen
  double h_start = 0.0;
  double end_penalty = 0.0;
  bool b_at_bound = false;
  bool gamma_at_bound = false;
  bool converged = false;
  int iterations = 0;
};

struct FixedTauSolution {
  double tau = 0.0;
  ChannelModel channel;  // at the selected point
  StationaryPoint best;
  std::vector<StationaryPoint> candidates;  // distinct points found, ascending L
};

/// Continuous (b, Gamma) optimum for a fixed tau.
FixedTauSolution solve_fixed_tau(const GoalFunction& h, int n, double tau, double d, const OptimizerOptions& opts,
                                 const std::vector<std::pair<double, double>>& warm_starts = {});

struct IntegerSolution {
  std::int64_t b = 0;
  std::int64_t gamma = 0;
  double L = 0.0;
  ChannelModel channel;
};

/// Best integer neighbour of a continuous solution (ties: smaller b, then smaller Gamma).
IntegerSolution round_to_integers(const GoalFunction& h, int n, double tau, double d, double b, double gamma,
                                  const OptimizerOptions& opts);

struct Corollary2Report {
  enum class Flag { contains_minimizer, excluded, inapplicable };
  Flag flag = Flag::inapplicable;
  double window_lo = 0.0;  // (b*+1) d
  double window_hi = 0.0;  // (b*+Gamma*+E[Y]+1) d
  std::vector<std::pair<double, bool>> minimizers;  // (age, inside window)
  std::string message;
};

std::string to_string(Corollary2Report::Flag flag);

struct OptimizationResult {
  Policy policy = Policy::gora;
  PsMode ps_mode = PsMode::self_consistent;
  int n = 1;
  double d = 1.0;
  std::string status = "ok";

  std::int64_t b_star = 0;
  std::int64_t gamma_star = 0;
  double tau_star = 0.0;
  double L_star = 0.0;
  double ps_star = 0.0;
  double m_hat = 0.0;
  double h_start = 0.0;               // h((b*+1)d)
  double end_of_cycle_penalty = 0.0;  // E[h((b*+Gamma*+Y+1)d)]

  StationaryPoint continuous;  // at tau_star
  HessianEvaluation convexity;
  bool convexity_evaluated = false;
  Corollary2Report corollary2;

  std::vector<double> tau_local_minima;  // from the coarse tau scan
  int tau_evaluations = 0;
  // Relative change of L* if p_s were frozen at ps_star instead of recoupled (self-consistent mode only).
  double coupling_gap = 0.0;
};

OptimizationResult optimize(const GoalFunction& h, int n, double d, const OptimizerOptions& opts = {});

/// Solves SA, then TA, then GORA (up to opts.policy). Each richer policy keeps the
/// poorer solution when it is at least as good, so L(GORA) <= L(TA) <= L(SA).
std::vector<OptimizationResult> optimize_policies(const GoalFunction& h, int n, double d,
                                                  const OptimizerOptions& opts);

struct BruteForceRanges {
  std::int64_t b_max = 50;
  std::int64_t gamma_max = 300;
  std::vector<double> taus;  // empty: 25 evenly spaced points over [tau_lo/n, tau_hi/n]
  double tau_lo = 0.2;
  double tau_hi = 5.0;
  std::size_t max_points = 10'000'000;
  SeriesControl series;
};

/// Exhaustive evaluation over the integer (b, Gamma) grid times the tau grid with the
/// self-consistent p_s at every point. Throws RangeError above max_points.
OptimizationResult brute_force_reference(const GoalFunction& h, int n, double d, const BruteForceRanges& ranges);

std::vector<double> default_tau_grid(int n, double lo, double hi, int points);

Corollary2Report corollary2_diagnostic(const OptimizationResult& result, const GoalFunction& h);

}  // namespace gora
