#include "gora/renewal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <boost/math/tools/toms748_solve.hpp>
#include <cstdint>
#include <limits>
#include <fmt/format.h>

#include "gora/errors.hpp"
#include "gora/polynomial.hpp"

namespace gora {

namespace {

constexpr std::int64_t kMaxSeriesTerms = 200'000'000;

// Neumaier compensated accumulator.
struct Sum {
  double hi = 0.0;
  double lo = 0.0;

  void add(double x) {
    const double t = hi + x;
    if (std::abs(hi) >= std::abs(x)) {
      lo += (hi - t) + x;
    } else {
      lo += (x - t) + hi;
    }
    hi = t;
  }
  double value() const { return hi + lo; }
};

void check_ps(double ps) {
  if (!(ps > 0.0 && ps <= 1.0)) throw DomainError(fmt::format("success probability must lie in (0, 1], got {}", ps));
}

double tail_probability(double ps, std::int64_t y_max) {
  if (ps >= 1.0) return 0.0;
  return std::exp(static_cast<double>(y_max) * std::log1p(-ps));
}

void check_tail(double tail, double scale, const char* what) {
  if (tail > 1e-6 * std::abs(scale)) {
    throw PrecisionError(fmt::format("{}: truncation tail bound {:.3e} exceeds 1e-6 of |{:.6e}|; use a smaller tail mass",
                                     what, tail, scale));
  }
}

}  // namespace

void PolicyParams::validate() const {
  if (!(b >= 0.0)) throw DomainError(fmt::format("policy: b must be >= 0 (got {})", b));
  if (!(gamma >= 0.0)) throw DomainError(fmt::format("policy: gamma must be >= 0 (got {})", gamma));
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError(fmt::format("policy: tau must lie in (0, 1) (got {})", tau));
  if (!(d > 0.0)) throw DomainError(fmt::format("policy: slot duration must be positive (got {})", d));
}

std::string to_string(PsSource source) {
  switch (source) {
    case PsSource::fixed_point: return "fixed_point";
    case PsSource::external: return "external";
    case PsSource::empirical: return "empirical";
  }
  return "unknown";
}

std::int64_t SeriesControl::y_max(double ps) const {
  check_ps(ps);
  if (!(tail_mass > 0.0 && tail_mass < 1.0)) throw DomainError("series: tail mass must lie in (0, 1)");
  if (ps >= 1.0) return 1;
  const double y = std::ceil(std::log(tail_mass) / std::log1p(-ps));
  if (y > static_cast<double>(kMaxSeriesTerms)) {
    throw PrecisionError(fmt::format("series: p_s = {:.3e} needs {:.3e} terms", ps, y));
  }
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(y));
}

double success_prob_instant(double tau, long m) {
  if (m < 1) throw DomainError(fmt::format("success_prob_instant: active count must be >= 1 (got {})", m));
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("success_prob_instant: tau must lie in (0, 1)");
  return tau * std::pow(1.0 - tau, static_cast<double>(m - 1));
}

ChannelModel steady_state_ps(int n, double tau, double gamma, double rel_tol) {
  if (n < 1) throw DomainError(fmt::format("steady_state_ps: n must be >= 1 (got {})", n));
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("steady_state_ps: tau must lie in (0, 1)");
  if (!(gamma >= 0.0)) throw DomainError("steady_state_ps: gamma must be >= 0");

  const double log_idle = std::log1p(-tau);
  const double nn = static_cast<double>(n);
  auto active = [&](double p) { return nn / (1.0 + gamma * p); };
  auto target = [&](double p) { return tau * std::exp((std::max(active(p), 1.0) - 1.0) * log_idle); };

  ChannelModel ch;
  ch.n = n;
  ch.tau = tau;
  ch.gamma = gamma;
  ch.source = PsSource::fixed_point;

  double p = tau * std::exp((nn - 1.0) * log_idle);  // all nodes active
  // The damped map is increasing, so iterates climb monotonically towards the
  // smallest fixed point. Near a tangency the climb is very slow; past kDampedIter
  // the first crossing of p - target(p) above the current iterate is bracketed on
  // a fine grid and solved with TOMS 748, which lands on the same fixed point.
  constexpr int kMaxIter = 100'000;
  constexpr int kDampedIter = 400;
  int it = 0;
  bool converged = false;
  for (; it < kDampedIter; ++it) {
    const double next = 0.5 * p + 0.5 * target(p);
    converged = std::abs(next - p) < rel_tol * p;
    p = next;
    if (converged) break;
  }
  if (!converged) {
    auto g = [&](double x) { return x - target(x); };
    constexpr int kGrid = 4096;
    double a = p, ga = g(p);
    bool found = false;
    for (int k = 1; k <= kGrid && !found; ++k) {
      // The last grid point is tau itself, where g >= 0 always holds.
      const double x = (k == kGrid) ? tau : p + (tau - p) * static_cast<double>(k) / kGrid;
      const double gx = g(x);
      if (gx >= 0.0) {
        if (gx == 0.0) {
          p = x;
        } else {
          std::uintmax_t max_iter = 200;
          const auto br = boost::math::tools::toms748_solve(
              g, a, x, ga, gx, [rel_tol](double l, double r) { return std::abs(r - l) <= rel_tol * std::abs(l); },
              max_iter);
          p = 0.5 * (br.first + br.second);
          it += static_cast<int>(max_iter);
        }
        found = true;
      }
      a = x;
      ga = gx;
    }
    if (!found || !(p > 0.0) || it >= kMaxIter) {
      throw ConvergenceError(fmt::format("steady_state_ps: no convergence at n={}, tau={}, gamma={}; last bracket [{}, {}]",
                                         n, tau, gamma, a, tau));
    }
  }

  // Newton polish on g(p) = p - target(p); target is increasing in p.
  for (int k = 0; k < 20; ++k) {
    const double f = target(p);
    const double g = p - f;
    if (g == 0.0) break;
    const double m = active(p);
    const double df = (m > 1.0) ? f * log_idle * (-nn * gamma / ((1.0 + gamma * p) * (1.0 + gamma * p))) : 0.0;
    const double denom = 1.0 - df;
    if (!(denom > 0.0)) break;
    const double cand = p - g / denom;
    if (!(cand > 0.0 && cand <= tau) || std::abs(cand - target(cand)) >= std::abs(g)) break;
    p = cand;
  }

  ch.ps = p;
  ch.m_hat = std::max(active(p), 1.0);
  ch.iterations = it + 1;
  if (active(p) > 1.0) {
    // Implicit differentiation of p = target(p, Gamma).
    const double f = target(p);
    const double q = 1.0 + gamma * p;
    const double f_p = f * log_idle * (-nn * gamma / (q * q));
    const double f_g = f * log_idle * (-nn * p / (q * q));
    ch.dps_dgamma = f_g / (1.0 - f_p);
  }
  return ch;
}

ChannelModel channel_with_ps(int n, double tau, double gamma, double ps, PsSource source) {
  if (n < 1) throw DomainError("channel: n must be >= 1");
  check_ps(ps);
  ChannelModel ch;
  ch.n = n;
  ch.tau = tau;
  ch.gamma = gamma;
  ch.ps = ps;
  ch.m_hat = std::clamp(static_cast<double>(n) / (1.0 + gamma * ps), 1.0, static_cast<double>(n));
  ch.source = source;
  return ch;
}

std::vector<double> geometric_moments(double p, int max_order) {
  check_ps(p);
  // Y = 1 w.p. p, else 1 + Y'  =>  m_k = (p + r sum_{j<k} C(k,j) m_j) / p.
  const double r = 1.0 - p;
  std::vector<double> m(static_cast<std::size_t>(max_order) + 1, 1.0);
  for (int k = 1; k <= max_order; ++k) {
    double binom = 1.0;
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      acc += binom * m[static_cast<std::size_t>(j)];
      binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
    m[static_cast<std::size_t>(k)] = (p + r * acc) / p;
  }
  return m;
}

namespace {

// Tail bounds via memorylessness: sum_{y > y_max} w_y T(y) = P(Y > y_max) E[T(y_max + Y)].
void add_tail_bounds(const GoalFunction& h, double s, double d, double ps, std::int64_t y_max, double last_cum,
                     CycleMoments& out) {
  const double tail_p = tail_probability(ps, y_max);
  if (tail_p <= 0.0) return;
  const double x0 = (s + static_cast<double>(y_max) + 1.0) * d;
  const auto env0 = h.growth_envelope(x0, 0);
  const auto env1 = h.growth_envelope(x0, 1);
  const auto mom = geometric_moments(ps, static_cast<int>(std::max(env0.size(), env1.size())) + 1);
  double e_h = 0.0, e_yh = 0.0, e_hp = 0.0, dk = 1.0;
  for (std::size_t k = 0; k < env0.size(); ++k, dk *= d) {
    e_h += env0[k] * dk * mom[k];
    e_yh += env0[k] * dk * mom[k + 1];
  }
  dk = 1.0;
  for (std::size_t k = 0; k < env1.size(); ++k, dk *= d) e_hp += env1[k] * dk * mom[k];
  out.cycle_integral_tail = tail_p * (std::abs(last_cum) + d * e_yh);
  out.end_penalty_tail = tail_p * e_h;
  out.end_slope_tail = tail_p * e_hp;
  out.start_penalty_tail = tail_p * (std::abs(out.start_penalty) + std::abs(out.start_slope));
}

constexpr std::size_t kWide = poly::kMaxCoefficients + 2;
using Coeffs = std::array<double, kWide>;

// sum_{t=0}^{T} r^t Q(t) * p for a polynomial Q, via mu_k = E[U^k], U = Y - 1:
// sum_{t>=0} r^t t^k = mu_k / p.
double geometric_poly_sum(const Coeffs& q, std::size_t nq, std::int64_t T, double r, const std::vector<double>& mu) {
  double head = 0.0;
  for (std::size_t k = 0; k < nq; ++k) head += q[k] * mu[k];
  const double rt = (r > 0.0) ? std::exp(static_cast<double>(T + 1) * std::log(r)) : 0.0;
  if (rt == 0.0) return head;
  Coeffs shifted{};
  poly::taylor_shift(std::span<const double>(q.data(), nq), static_cast<double>(T + 1),
                     std::span<double>(shifted.data(), nq));
  double rest = 0.0;
  for (std::size_t k = 0; k < nq; ++k) rest += shifted[k] * mu[k];
  return head - rt * rest;
}

}  // namespace

CycleMoments cycle_moments(const GoalFunction& h, double b, double gamma, double d, double ps,
                           const SeriesControl& series) {
  check_ps(ps);
  if (!(b >= 0.0) || !(gamma >= 0.0)) throw DomainError("cycle_moments: b and gamma must be >= 0");
  if (!(d > 0.0)) throw DomainError("cycle_moments: slot duration must be positive");

  CycleMoments out;
  const std::int64_t y_max = series.y_max(ps);
  const double s = b + gamma;
  const double start = (b + 1.0) * d;
  out.terms = y_max;
  out.mean_cycle_slots = gamma + 1.0 / ps;
  out.start_penalty = h.eval(start);
  out.start_slope = h.derivative(start);

  const double r = 1.0 - ps;
  const double inv_r = (r > 0.0) ? 1.0 / r : 0.0;
  // Moments of U = Y - 1 (geometric on {0, 1, ...}): mu_k = (r/p) sum_{j<k} C(k,j) mu_j.
  std::vector<double> mu(kWide, 0.0);
  mu[0] = 1.0;
  for (std::size_t k = 1; k < kWide; ++k) {
    double binom = 1.0, acc = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      acc += binom * mu[j];
      binom = binom * static_cast<double>(k - j) / static_cast<double>(j + 1);
    }
    mu[k] = (r / ps) * acc;
  }

  auto age_at = [&](std::int64_t y) { return (s + static_cast<double>(y) + 1.0) * d; };
  // Smallest y >= 1 whose end age lies at or beyond `edge`, capped at y_max + 1.
  auto first_y = [&](double edge) {
    const double guess = std::max(1.0, std::ceil(edge / d - s - 1.0));
    if (guess > static_cast<double>(y_max) + 1.0) return y_max + 1;
    auto y = static_cast<std::int64_t>(guess);
    while (y > 1 && age_at(y - 1) >= edge) --y;
    while (y <= y_max && age_at(y) < edge) ++y;
    return y;
  };

  const auto starts = h.breakpoints();
  Sum ei, eh, ehp, gap, sgap, eip;
  double last_cum = 0.0;
  std::size_t j = h.piece_index(age_at(1));
  std::int64_t ya = 1;
  while (ya <= y_max) {
    const std::int64_t next_start = (j + 1 < starts.size()) ? first_y(starts[j + 1]) : y_max + 1;
    const std::int64_t yb = std::min(y_max, next_start - 1);
    if (yb >= ya) {
      const auto c = h.coefficients(j);
      const double ua = age_at(ya) - starts[j];
      // End penalty as a polynomial in t = y - ya.
      Coeffs hv{}, hp{}, cum{}, ycum{};
      poly::taylor_shift(c, ua, std::span<double>(hv.data(), c.size()));
      double dk = 1.0;
      for (std::size_t k = 0; k < c.size(); ++k, dk *= d) hv[k] *= dk;
      for (std::size_t k = 0; k + 1 < c.size(); ++k) hp[k] = static_cast<double>(k + 1) * hv[k + 1] / d;
      // Cumulative integral from `start`: constant term exact, higher terms from the antiderivative.
      cum[0] = h.integrate(start, age_at(ya));
      for (std::size_t k = 0; k < c.size(); ++k) cum[k + 1] = hv[k] * d / static_cast<double>(k + 1);
      const std::size_t ncum = c.size() + 1;
      // (y - 1) * cumulative, for the p_s-derivative of the weights.
      const double y0 = static_cast<double>(ya - 1);
      for (std::size_t k = 0; k < ncum; ++k) {
        ycum[k] += y0 * cum[k];
        ycum[k + 1] += cum[k];
      }
      const double scale = (ya == 1) ? 1.0 : std::exp(static_cast<double>(ya - 1) * std::log(r));
      const std::int64_t T = yb - ya;

      Coeffs hv_gap = hv, hp_gap = hp;
      hv_gap[0] -= out.start_penalty;
      hp_gap[0] -= out.start_slope;
      const double s_cum = geometric_poly_sum(cum, ncum, T, r, mu);
      eh.add(scale * geometric_poly_sum(hv, c.size(), T, r, mu));
      ehp.add(scale * geometric_poly_sum(hp, c.size(), T, r, mu));
      gap.add(scale * geometric_poly_sum(hv_gap, c.size(), T, r, mu));
      sgap.add(scale * geometric_poly_sum(hp_gap, c.size(), T, r, mu));
      ei.add(scale * s_cum);
      eip.add(scale * (s_cum / ps - inv_r * geometric_poly_sum(ycum, ncum + 1, T, r, mu)));
      if (yb == y_max) last_cum = poly::horner(std::span<const double>(cum.data(), ncum), static_cast<double>(T));
    }
    ya = std::max(ya, yb + 1);
    ++j;
    if (j >= starts.size()) break;
  }
  out.cycle_integral = ei.value();
  out.end_penalty = eh.value();
  out.end_slope = ehp.value();
  out.penalty_gap = gap.value();
  out.slope_gap = sgap.value();
  out.cycle_integral_dps = eip.value();
  add_tail_bounds(h, s, d, ps, y_max, last_cum, out);
  return out;
}

CycleMoments cycle_moments_reference(const GoalFunction& h, double b, double gamma, double d, double ps,
                                     const SeriesControl& series) {
  check_ps(ps);
  if (!(b >= 0.0) || !(gamma >= 0.0)) throw DomainError("cycle_moments: b and gamma must be >= 0");
  if (!(d > 0.0)) throw DomainError("cycle_moments: slot duration must be positive");

  CycleMoments out;
  const std::int64_t y_max = series.y_max(ps);
  const double s = b + gamma;
  const double start = (b + 1.0) * d;
  out.terms = y_max;
  out.mean_cycle_slots = gamma + 1.0 / ps;
  out.start_penalty = h.eval(start);
  out.start_slope = h.derivative(start);

  const double r = 1.0 - ps;
  const std::size_t nc = static_cast<std::size_t>(h.max_degree()) + 1;
  const auto starts = h.breakpoints();

  // Weights of the backward slot integral over [x - d, x] for Taylor data at x.
  std::array<double, poly::kMaxCoefficients> back{};
  {
    double dp = d;
    for (std::size_t k = 0; k < nc; ++k) {
      back[k] = ((k % 2 == 0) ? dp : -dp) / static_cast<double>(k + 1);
      dp *= d;
    }
  }

  Sum cum;
  cum.add(h.integrate(start, (s + 1.0) * d));
  Sum ei, eh, ehp, gap, sgap, eip;
  const double inv_p = 1.0 / ps;
  const double inv_r = (r > 0.0) ? 1.0 / r : 0.0;
  std::array<double, poly::kMaxCoefficients> q{};
  double w = ps;
  for (std::int64_t y = 1; y <= y_max; ++y) {
    const double x_hi = (s + static_cast<double>(y) + 1.0) * d;
    const double x_lo = x_hi - d;
    const std::size_t j = h.taylor_at(x_hi, q);
    double slot, hv, hp;
    if (x_lo >= starts[j]) {
      hv = q[0];
      hp = q[1];
      slot = 0.0;
      for (std::size_t k = 0; k < nc; ++k) slot += q[k] * back[k];
    } else {
      hv = q[0];
      hp = q[1];
      slot = h.integrate(x_lo, x_hi);
    }
    cum.add(slot);
    ei.add(w * cum.value());
    eh.add(w * hv);
    ehp.add(w * hp);
    gap.add(w * (hv - out.start_penalty));
    sgap.add(w * (hp - out.start_slope));
    // d w_y / dp = w_y (1/p - (y-1)/r)
    eip.add(w * (inv_p - static_cast<double>(y - 1) * inv_r) * cum.value());
    w *= r;
  }
  out.cycle_integral = ei.value();
  out.end_penalty = eh.value();
  out.end_slope = ehp.value();
  out.penalty_gap = gap.value();
  out.slope_gap = sgap.value();
  out.cycle_integral_dps = eip.value();

  add_tail_bounds(h, s, d, ps, y_max, cum.value(), out);
  return out;
}

namespace {

CycleMoments moments_for(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                         const SeriesControl& s) {
  p.validate();
  return cycle_moments(h, p.b, p.gamma, p.d, ch.ps, s);
}

}  // namespace

PenaltyEvaluation expected_penalty(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                                   const SeriesControl& s) {
  const auto m = moments_for(h, p, ch, s);
  const double denom = m.mean_cycle_slots * p.d;
  PenaltyEvaluation out{m.cycle_integral / denom, m.cycle_integral_tail / denom, m.terms};
  check_tail(out.tail_bound, out.value, "expected_penalty");
  return out;
}

Residuals residuals(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch, const SeriesControl& s) {
  const auto m = moments_for(h, p, ch, s);
  const double L = m.cycle_integral / (m.mean_cycle_slots * p.d);
  check_tail(m.cycle_integral_tail / (m.mean_cycle_slots * p.d), L, "expected_penalty");
  check_tail(m.end_penalty_tail + m.start_penalty_tail, std::max(std::abs(m.end_penalty), std::abs(m.start_penalty)),
             "residual");
  return {m.penalty_gap, m.end_penalty - L, L};
}

double residual_b(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch, const SeriesControl& s) {
  return residuals(h, p, ch, s).f1;
}

double residual_gamma(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch, const SeriesControl& s) {
  return residuals(h, p, ch, s).f2;
}

double penalty_ps_sensitivity(const CycleMoments& m, double ps, double d) {
  const double phi = m.mean_cycle_slots;
  // L = I / (phi d), phi = Gamma + 1/p.
  return m.cycle_integral_dps / (phi * d) + m.cycle_integral / (phi * phi * d * ps * ps);
}

HessianEvaluation hessian(const GoalFunction& h, const PolicyParams& p, const ChannelModel& ch,
                          const SeriesControl& s) {
  p.validate();
  const std::int64_t y_max = s.y_max(ch.ps);
  const double shift = p.b + p.gamma;
  for (double kink : h.kinks()) {
    const double tol = 1e-9 * std::max(1.0, kink);
    const double start = (p.b + 1.0) * p.d;
    bool hit = std::abs(kink - start) <= tol;
    const double y = std::round(kink / p.d - shift - 1.0);
    if (!hit && y >= 1.0 && y <= static_cast<double>(y_max)) hit = std::abs(kink - (shift + y + 1.0) * p.d) <= tol;
    if (hit) throw NonSmoothError(fmt::format("hessian: evaluation age hits the kink of h at {}", kink));
  }

  const auto m = cycle_moments(h, p.b, p.gamma, p.d, ch.ps, s);
  const double phi = m.mean_cycle_slots;
  const double d = p.d;
  HessianEvaluation out;
  out.d2L_db2 = m.slope_gap * d / phi;
  out.d2L_dbdg = (phi * m.end_slope * d - m.penalty_gap) / (phi * phi);
  out.d2L_dg2 = (phi * m.end_slope * d - 2.0 * m.end_penalty) / (phi * phi) +
                2.0 * m.cycle_integral / (phi * phi * phi * d);
  out.det = out.d2L_db2 * out.d2L_dg2 - out.d2L_dbdg * out.d2L_dbdg;
  out.positive_definite = out.d2L_db2 > 0.0 && out.det > 0.0;
  if (out.positive_definite) {
    out.verdict = "positive definite";
  } else if (out.d2L_db2 == 0.0 && out.det == 0.0) {
    out.verdict = "not positive definite (flat)";
  } else {
    out.verdict = "not positive definite";
  }
  return out;
}

}  // namespace gora
