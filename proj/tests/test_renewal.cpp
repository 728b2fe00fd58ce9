#include <cmath>
#include <random>

#include "doctest.h"
#include "gora/errors.hpp"
#include "gora/goal.hpp"
#include "gora/renewal.hpp"
#include "oracles.hpp"

using namespace gora;

namespace {

const GoalFunction& convex() {
  static const auto h = make_goal({0}, {{25, -10, 1}});
  return h;
}

const GoalFunction& bimodal() {
  static const auto h = make_goal({0, 10, 40}, {{0, 0, 0.01}, {1, -0.053333333333333333, 8.8888888888888889e-4}, {0.2, 0, 0.002}});
  return h;
}

PenaltyEvaluation eval_at(const GoalFunction& h, double b, double gamma, double ps, double d = 1.0,
                          const SeriesControl& s = {}) {
  const auto ch = channel_with_ps(10, 0.3, gamma, ps, PsSource::external);
  return expected_penalty(h, {b, 0.3, gamma, d}, ch, s);
}

double L_at(const GoalFunction& h, double b, double gamma, double ps, double d = 1.0) {
  return eval_at(h, b, gamma, ps, d).value;
}

// The truncated series may differ from the exact value by at most its certified tail bound.
bool within_tail(const PenaltyEvaluation& e, double exact) {
  return std::abs(e.value - exact) <= e.tail_bound + 1e-13 * std::max(1.0, std::abs(exact));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("instantaneous success probability") {
  CHECK(success_prob_instant(0.5, 1) == 0.5);
  CHECK(success_prob_instant(0.5, 2) == 0.25);
  CHECK(success_prob_instant(0.1, 10) == doctest::Approx(0.1 * std::pow(0.9, 9)).epsilon(1e-15));
  CHECK_THROWS_AS(success_prob_instant(0.5, 0), DomainError);
  CHECK_THROWS_AS(success_prob_instant(1.0, 3), DomainError);
}

TEST_CASE("steady state without back-off is the all-active formula") {
  for (int n : {1, 2, 10, 100}) {
    for (double tau : {0.01, 0.1, 0.5}) {
      const auto ch = steady_state_ps(n, tau, 0.0);
      CHECK(ch.ps == doctest::Approx(tau * std::pow(1 - tau, n - 1)).epsilon(1e-13));
      CHECK(ch.m_hat == doctest::Approx(n));
    }
  }
}

TEST_CASE("steady state is self-consistent") {
  for (int n : {2, 10, 50, 100, 1000}) {
    for (double tau_n : {0.3, 1.0, 2.0}) {
      for (double gamma : {1.0, 10.0, 100.0, 1000.0}) {
        const double tau = std::min(tau_n / n, 0.9);
        const auto ch = steady_state_ps(n, tau, gamma);
        const double m = n / (1 + gamma * ch.ps);
        CHECK(ch.m_hat == doctest::Approx(std::max(m, 1.0)).epsilon(1e-12));
        CHECK(ch.m_hat <= n);
        const double target = tau * std::pow(1 - tau, std::max(m, 1.0) - 1);
        CHECK(std::abs(ch.ps - target) <= 1e-10 * ch.ps);
      }
    }
  }
}

TEST_CASE("steady state picks the smallest fixed point") {
  // Scan p - target(p) on a dense grid: the solver's p_s must be the first sign change.
  const int n = 100;
  const double tau = 0.03, gamma = 300;
  const auto ch = steady_state_ps(n, tau, gamma);
  auto g = [&](double p) {
    const double m = std::max(n / (1 + gamma * p), 1.0);
    return p - tau * std::pow(1 - tau, m - 1);
  };
  double first = -1;
  for (int k = 1; k <= 200000; ++k) {
    const double p = tau * k / 200000.0;
    if (g(p) >= 0) {
      first = p;
      break;
    }
  }
  REQUIRE(first > 0);
  CHECK(std::abs(ch.ps - first) <= tau / 200000.0);
}

TEST_CASE("steady state rejects bad inputs") {
  CHECK_THROWS_AS(steady_state_ps(0, 0.1, 0), DomainError);
  CHECK_THROWS_AS(steady_state_ps(5, 0.0, 0), DomainError);
  CHECK_THROWS_AS(steady_state_ps(5, 0.1, -1), DomainError);
}

TEST_CASE("linear goal with no staleness and no back-off has a closed form") {
  // L = E[((1+Y)^2 - 1) / 2] / E[Y] = (2 + p) / (2 p)
  const auto h = make_goal({0}, {{0, 1}});
  for (double p : {0.1, 0.4, 0.5, 0.9}) {
    CHECK(within_tail(eval_at(h, 0, 0, p), (2 + p) / (2 * p)));
  }
  CHECK(within_tail(eval_at(h, 0, 0, 0.5), 2.5));
}

TEST_CASE("constant goal gives its constant up to the tail bound") {
  const auto h = make_goal({0}, {{7}});
  for (double b : {0.0, 3.0, 17.5}) {
    for (double gamma : {0.0, 2.0, 100.0}) {
      const auto e = eval_at(h, b, gamma, 0.3);
      CHECK(within_tail(e, 7.0));
      CHECK(e.tail_bound <= 1e-6 * 7.0);
    }
  }
}

TEST_CASE("penalty agrees with a Monte Carlo renewal-reward oracle") {
  // integral of (x-5)^2 in closed form
  auto integral = [](double a, double b) { return (std::pow(b - 5, 3) - std::pow(a - 5, 3)) / 3.0; };
  const double b = 3, gamma = 2, p = 0.4;
  const auto mc = oracle::renewal_ratio(integral, b, gamma, 1.0, p, 400000, 99);
  const double L = L_at(convex(), b, gamma, p);
  CHECK(std::abs(L - mc.mean) <= 4 * mc.stderr_);
  CHECK(mc.stderr_ < 0.01 * L);
}

TEST_CASE("closed-form series match the term-by-term sums") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ub(0, 60), ug(0, 80), up(0.02, 0.95), ud(0.25, 2.0);
  for (int trial = 0; trial < 60; ++trial) {
    const auto& h = trial % 2 ? bimodal() : convex();
    const double b = ub(rng), g = ug(rng), p = up(rng), d = ud(rng);
    const auto fast = cycle_moments(h, b, g, d, p);
    const auto ref = cycle_moments_reference(h, b, g, d, p);
    CHECK(fast.terms == ref.terms);
    CHECK(rel(fast.cycle_integral, ref.cycle_integral) < 1e-11);
    CHECK(rel(fast.end_penalty, ref.end_penalty) < 1e-11);
    CHECK(rel(fast.end_slope, ref.end_slope) < 1e-11);
    CHECK(rel(fast.cycle_integral_dps, ref.cycle_integral_dps) < 1e-10);
  }
}

TEST_CASE("tightening the series tail does not move the penalty") {
  SeriesControl coarse{1e-12}, fine{1e-14};
  for (double p : {0.01, 0.2, 0.7}) {
    const auto a = eval_at(bimodal(), 4, 5, p, 1.0, coarse);
    const auto c = eval_at(bimodal(), 4, 5, p, 1.0, fine);
    CHECK(std::abs(a.value - c.value) <= a.tail_bound + c.tail_bound);
    CHECK(c.terms > a.terms);
  }
}

TEST_CASE("residuals match finite differences of the penalty") {
  const double step = 1e-3;
  for (const auto* h : {&convex(), &bimodal()}) {
    for (double b : {1.5, 6.5}) {  // end ages stay off the kinks at 10 and 40
      for (double gamma : {2.0, 12.0}) {
        for (double p : {0.2, 0.6}) {
          const auto ch = channel_with_ps(10, 0.3, gamma, p, PsSource::external);
          const PolicyParams pp{b, 0.3, gamma, 1.0};
          const auto r = residuals(*h, pp, ch);
          const double phi = gamma + 1 / p;
          const double dLdb = oracle::five_point_derivative([&](double x) { return L_at(*h, x, gamma, p); }, b, step);
          const double dLdg = oracle::five_point_derivative([&](double x) { return L_at(*h, b, x, p); }, gamma, step);
          CHECK(std::abs(r.f1 - dLdb * phi) <= 1e-6 * std::max(1.0, std::abs(r.f1)));
          CHECK(std::abs(r.f2 - dLdg * phi) <= 1e-6 * std::max(1.0, std::abs(r.f2)));
          CHECK(residual_b(*h, pp, ch) == doctest::Approx(r.f1));
          CHECK(residual_gamma(*h, pp, ch) == doctest::Approx(r.f2));
          CHECK(r.L == doctest::Approx(L_at(*h, b, gamma, p)));
        }
      }
    }
  }
}

TEST_CASE("residual signs on an increasing goal") {
  // h(x) = x: moving b later or lengthening the back-off always costs more.
  const auto h = make_goal({0}, {{0, 1}});
  const auto ch = channel_with_ps(10, 0.3, 4, 0.3, PsSource::external);
  const auto r = residuals(h, {2, 0.3, 4, 1.0}, ch);
  CHECK(r.f1 > 0);
  CHECK(r.f2 > 0);
}

TEST_CASE("Hessian matches second differences") {
  const double step = 1e-3;
  for (double b : {1.5, 6.5}) {
    for (double gamma : {2.0, 12.0}) {
      const double p = 0.3;
      const auto ch = channel_with_ps(10, 0.3, gamma, p, PsSource::external);
      const auto H = hessian(bimodal(), {b, 0.3, gamma, 1.0}, ch);
      auto L = [&](double x, double y) { return L_at(bimodal(), x, y, p); };
      const double hbb = oracle::second_difference([&](double x) { return L(x, gamma); }, b, step);
      const double hgg = oracle::second_difference([&](double y) { return L(b, y); }, gamma, step);
      const double hbg =
          (L(b + step, gamma + step) - L(b + step, gamma - step) - L(b - step, gamma + step) + L(b - step, gamma - step)) /
          (4 * step * step);
      CHECK(std::abs(H.d2L_db2 - hbb) <= 1e-4 * std::max(1e-3, std::abs(hbb)));
      CHECK(std::abs(H.d2L_dg2 - hgg) <= 1e-4 * std::max(1e-3, std::abs(hgg)));
      CHECK(std::abs(H.d2L_dbdg - hbg) <= 1e-4 * std::max(1e-3, std::abs(hbg)));
    }
  }
}

TEST_CASE("Hessian verdicts") {
  const auto ch = channel_with_ps(10, 0.3, 3, 0.4, PsSource::external);
  const PolicyParams pp{2, 0.3, 3, 1.0};
  SUBCASE("constant goal is flat") {
    const auto H = hessian(make_goal({0}, {{7}}), pp, ch);
    CHECK(H.d2L_db2 == 0.0);
    CHECK(H.det == 0.0);
    CHECK(H.verdict == "not positive definite (flat)");
  }
  SUBCASE("linear goal has no curvature in b") {
    const auto H = hessian(make_goal({0}, {{0, 1}}), pp, ch);
    CHECK(H.d2L_db2 == 0.0);
    CHECK_FALSE(H.positive_definite);
  }
  SUBCASE("strictly convex goal") {
    const auto H = hessian(convex(), pp, ch);
    CHECK(H.positive_definite);
    CHECK(H.verdict == "positive definite");
  }
  SUBCASE("an evaluation age on a kink is rejected") {
    const auto kinked = make_goal({0, 3}, {{3, -1}, {0, 2}});
    CHECK_THROWS_AS(hessian(kinked, pp, ch), NonSmoothError);  // start age (b+1)d = 3
    CHECK_NOTHROW(hessian(kinked, {2.5, 0.3, 3, 1.0}, ch));
  }
}

TEST_CASE("with p_s frozen, back-off is a convex combination of zero-back-off penalties") {
  // L(b, Gamma) = u/p L(b, 0) + u sum_{j=1..Gamma} L(b+j, 0), u = 1 / (Gamma + 1/p)
  for (double p : {0.1, 0.45}) {
    for (int gamma : {1, 4, 15}) {
      for (double b : {0.0, 2.0, 7.5}) {
        for (const auto* h : {&convex(), &bimodal()}) {
          const double u = 1.0 / (gamma + 1.0 / p);
          const auto e0 = eval_at(*h, b, 0, p, 0.5);
          double rhs = u / p * e0.value, slack = u / p * e0.tail_bound;
          double smallest = e0.value;
          for (int j = 1; j <= gamma; ++j) {
            const auto ej = eval_at(*h, b + j, 0, p, 0.5);
            rhs += u * ej.value;
            slack += u * ej.tail_bound;
            smallest = std::min(smallest, ej.value);
          }
          const auto lhs_eval = eval_at(*h, b, gamma, p, 0.5);
          const double lhs = lhs_eval.value;
          CHECK(std::abs(lhs - rhs) <= slack + lhs_eval.tail_bound + 1e-12 * std::max(1.0, std::abs(rhs)));
          // hence some zero-back-off policy is at least as good
          CHECK(smallest <= lhs * (1 + 1e-12));
        }
      }
    }
  }
}

TEST_CASE("penalty rejects invalid policies") {
  const auto ch = channel_with_ps(10, 0.3, 0, 0.3, PsSource::external);
  CHECK_THROWS_AS(expected_penalty(convex(), {-1, 0.3, 0, 1}, ch), DomainError);
  CHECK_THROWS_AS(expected_penalty(convex(), {0, 0.3, -1, 1}, ch), DomainError);
  CHECK_THROWS_AS(expected_penalty(convex(), {0, 0.3, 0, 0}, ch), DomainError);
  CHECK_THROWS_AS(channel_with_ps(10, 0.3, 0, 0.0, PsSource::external), DomainError);
}
