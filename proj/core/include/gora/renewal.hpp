#pragma once

// Steady-state renewal analysis of one node under the symmetric policy
// (b, tau, Gamma): success probability, the time-average expected penalty
// L(b, tau, Gamma), its stationarity residuals, and its Hessian in (b, Gamma).
//
// A node's renewal cycle is Gamma silent slots followed by Y active slots,
// Y ~ Geometric(p_s) on {1, 2, ...}. Expectations over Y are truncated series
// with a certified tail bound; all functions here hold p_s fixed.

#include <cstdint>
#include <string>
#include <vector>

#include "gora/goal.hpp"

namespace gora {

struct PolicyParams {
  double b = 0.0;      // buffer staleness, slots
  double tau = 0.5;    // transmit probability of an active node
  double gamma = 0.0;  // back-off, slots
  double d = 1.0;      // slot duration, time units

  void validate() const;
};

enum class PsSource { fixed_point, external, empirical };

std::string to_string(PsSource source);

struct ChannelModel {
  int n = 1;
  double tau = 0.5;
  double gamma = 0.0;
  double ps = 0.5;
  double m_hat = 1.0;  // expected number of active nodes
  PsSource source = PsSource::fixed_point;
  int iterations = 0;
  double dps_dgamma = 0.0;  // sensitivity of the fixed point to Gamma (0 unless fixed_point)
};

struct SeriesControl {
  double tail_mass = 1e-12;

  /// Smallest y_max with P(Y > y_max) <= tail_mass.
  std::int64_t y_max(double ps) const;
};

/// tau (1 - tau)^(m - 1): success probability of each of m active nodes.
double success_prob_instant(double tau, long m);

/// Self-consistent steady state: m_hat = n / (1 + Gamma p_s), p_s = tau (1 - tau)^(max(m_hat, 1) - 1).
/// Damped fixed-point iteration from the all-active state, stopped when successive
/// p_s differ by less than rel_tol * p_s, then polished by Newton steps.
ChannelModel steady_state_ps(int n, double tau, double gamma, double rel_tol = 1e-13);

/// Channel with a caller-supplied success probability (external or simulator-measured).
ChannelModel channel_with_ps(int n, double tau, double gamma, double ps, PsSource source);

/// Raw moments E[Y^k], k = 0..max_order, of Y ~ Geometric(p) on {1, 2, ...}.
std::vector<double> geometric_moments(double p, int max_order);

// Truncated expectations over the renewal cycle. `start` is (b+1)d and `end`
// is (b+Gamma+Y+1)d.
struct CycleMoments {
  double mean_cycle_slots = 0.0;    // Gamma + E[Y]
  double cycle_integral = 0.0;      // E[integral of h over (start, end)]
  double end_penalty = 0.0;         // E[h(end)]
  double end_slope = 0.0;           // E[h'(end)]
  double penalty_gap = 0.0;         // E[h(end) - h(start)]
  double slope_gap = 0.0;           // E[h'(end) - h'(start)]
  double start_penalty = 0.0;       // h(start)
  double start_slope = 0.0;         // h'(start)
  double cycle_integral_tail = 0.0; // bounds on the discarded series tails
  double end_penalty_tail = 0.0;
  double end_slope_tail = 0.0;
  double start_penalty_tail = 0.0;  // |h(start)| P(Y > y_max)
  double cycle_integral_dps = 0.0;  // d(cycle_integral)/d(p_s) of the truncated series
  std::int64_t terms = 0;
};

/// Each run of y whose end age stays inside one piece of h is summed in closed
/// form (finite geometric-polynomial sums), so the cost does not grow with y_max.
CycleMoments cycle_moments(const GoalFunction& h, double b, double gamma, double d, double ps,
                           const SeriesControl& series = {});

/// Same truncated sums accumulated term by term; slower, kept as a cross-check.
CycleMoments cycle_moments_reference(const GoalFunction& h, double b, double gamma, double d, double ps,
                                     const SeriesControl& series = {});

struct PenaltyEvaluation {
  double value = 0.0;
  double tail_bound = 0.0;
  std::int64_t terms = 0;
};

/// L(b, tau, Gamma). Throws PrecisionError if the tail bound exceeds 1e-6 |L|.
PenaltyEvaluation expected_penalty(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                                   const SeriesControl& s = {});

/// F1 = E[h(end)] - h(start) = (dL/db) (Gamma + E[Y]).
double residual_b(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                  const SeriesControl& s = {});

/// F2 = E[h(end)] - E[integral]/((Gamma + E[Y]) d) = (dL/dGamma) (Gamma + E[Y]).
double residual_gamma(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                      const SeriesControl& s = {});

struct Residuals {
  double f1 = 0.0;
  double f2 = 0.0;
  double L = 0.0;
};

/// F1, F2 and L from a single series pass.
Residuals residuals(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                    const SeriesControl& s = {});

/// dL/dp_s at fixed (b, Gamma), from the same truncated series.
double penalty_ps_sensitivity(const CycleMoments& m, double ps, double d);

struct HessianEvaluation {
  double d2L_db2 = 0.0;
  double d2L_dbdg = 0.0;
  double d2L_dg2 = 0.0;
  double det = 0.0;
  bool positive_definite = false;
  std::string verdict;
};

/// Hessian of L in (b, Gamma). Throws NonSmoothError if an evaluation age sits on a kink of h.
HessianEvaluation hessian(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                          const SeriesControl& s = {});

}  // namespace gora
