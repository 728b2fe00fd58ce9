#include "gora/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <map>

#include "gora/errors.hpp"

namespace gora {

std::string to_string(Policy policy) {
  switch (policy) {
    case Policy::gora: return "GORA";
    case Policy::threshold_aloha: return "TA";
    case Policy::slotted_aloha: return "SA";
  }
  return "?";
}

Policy parse_policy(std::string_view name) {
  if (name == "GORA") return Policy::gora;
  if (name == "TA") return Policy::threshold_aloha;
  if (name == "SA") return Policy::slotted_aloha;
  throw DomainError(fmt::format("unknown policy '{}' (expected GORA, TA or SA)", name));
}

std::string to_string(PsMode mode) { return mode == PsMode::frozen ? "frozen" : "self_consistent"; }

PsMode parse_ps_mode(std::string_view name) {
  if (name == "self_consistent") return PsMode::self_consistent;
  if (name == "frozen") return PsMode::frozen;
  throw DomainError(fmt::format("unknown ps mode '{}' (expected self_consistent or frozen)", name));
}

std::string to_string(Corollary2Report::Flag flag) {
  switch (flag) {
    case Corollary2Report::Flag::contains_minimizer: return "contains_minimizer";
    case Corollary2Report::Flag::excluded: return "excluded";
    case Corollary2Report::Flag::inapplicable: return "inapplicable";
  }
  return "?";
}

namespace {

constexpr double kTieTol = 1e-12;

bool fixes_b(Policy p) { return p != Policy::gora; }
bool fixes_gamma(Policy p) { return p == Policy::slotted_aloha; }

bool better_point(const StationaryPoint& a, const StationaryPoint& b) {
  const double tol = kTieTol * std::max(1.0, std::abs(b.L));
  if (a.L < b.L - tol) return true;
  if (a.L > b.L + tol) return false;
  if (a.b != b.b) return a.b < b.b;
  return a.gamma < b.gamma;
}

// Objective for one tau: J(b, Gamma) = L(b, Gamma, p_s(Gamma)).
class TauProblem {
 public:
  TauProblem(const GoalFunction& h, int n, double tau, double d, const OptimizerOptions& opts,
             std::optional<double> ps_override = std::nullopt)
      : h_(h), n_(n), tau_(tau), d_(d), opts_(opts) {
    if (ps_override) {
      frozen_ = channel_with_ps(n, tau, 0.0, *ps_override, PsSource::external);
    } else if (opts.ps_mode == PsMode::frozen) {
      frozen_ = steady_state_ps(n, tau, opts.frozen_gamma);
    }
  }

  bool coupled() const { return !frozen_.has_value(); }

  ChannelModel channel(double gamma) const {
    if (frozen_) {
      ChannelModel ch = *frozen_;
      ch.gamma = gamma;
      ch.dps_dgamma = 0.0;
      return ch;
    }
    return steady_state_ps(n_, tau_, gamma);
  }

  StationaryPoint evaluate(double b, double gamma) const {
    ++evaluations_;
    const ChannelModel ch = channel(gamma);
    StationaryPoint sp;
    sp.b = b;
    sp.gamma = gamma;
    sp.ps = ch.ps;
    CycleMoments m;
    try {
      m = cycle_moments(h_, b, gamma, d_, ch.ps, opts_.series);
    } catch (const PrecisionError&) {
      // Success probability so small that the series is intractable: treat as infeasible.
      sp.L = std::numeric_limits<double>::infinity();
      sp.f1 = sp.f2 = sp.g = std::numeric_limits<double>::quiet_NaN();
      return sp;
    }
    const double phi = m.mean_cycle_slots;
    sp.L = m.cycle_integral / (phi * d_);
    const double tail = m.cycle_integral_tail / (phi * d_);
    if (tail > 1e-6 * std::abs(sp.L)) {
      throw PrecisionError(fmt::format("optimizer: series tail {:.3e} too large at b={}, gamma={}, p_s={:.3e}", tail, b,
                                       gamma, ch.ps));
    }
    sp.f1 = m.penalty_gap;
    sp.f2 = m.end_penalty - sp.L;
    sp.g = sp.f2;
    if (coupled() && ch.dps_dgamma != 0.0) sp.g += phi * penalty_ps_sensitivity(m, ch.ps, d_) * ch.dps_dgamma;
    sp.h_start = m.start_penalty;
    sp.end_penalty = m.end_penalty;
    return sp;
  }

  int evaluations() const { return evaluations_; }
  const GoalFunction& goal() const { return h_; }
  double d() const { return d_; }
  int n() const { return n_; }

 private:
  const GoalFunction& h_;
  int n_;
  double tau_;
  double d_;
  const OptimizerOptions& opts_;
  std::optional<ChannelModel> frozen_;
  mutable int evaluations_ = 0;
};

// Projected damped Newton on the stationarity residuals r = (f1, g), which are
// the gradient of J scaled by the mean cycle length.
StationaryPoint descend(const TauProblem& pr, double b0, double g0, bool fix_b, bool fix_g,
                        const OptimizerOptions& opts) {
  double x[2] = {fix_b ? 0.0 : std::max(0.0, b0), fix_g ? 0.0 : std::max(0.0, g0)};
  StationaryPoint cur = pr.evaluate(x[0], x[1]);
  if (!std::isfinite(cur.L)) return cur;
  auto res = [](const StationaryPoint& p, int i) { return i == 0 ? p.f1 : p.g; };

  int it = 0;
  for (; it < opts.max_newton; ++it) {
    const double tol = opts.residual_tol * std::max(1.0, std::abs(cur.L));
    bool free[2] = {!fix_b && !(x[0] == 0.0 && cur.f1 > 0.0), !fix_g && !(x[1] == 0.0 && cur.g > 0.0)};
    bool done = true;
    for (int i = 0; i < 2; ++i) {
      if (free[i] && std::abs(res(cur, i)) > tol) done = false;
    }
    if (done) {
      cur.converged = true;
      break;
    }

    std::array<int, 2> idx{};
    int k = 0;
    for (int i = 0; i < 2; ++i) {
      if (free[i]) idx[static_cast<std::size_t>(k++)] = i;
    }

    // Forward-difference Jacobian of r over the free coordinates.
    double jac[2][2] = {{0, 0}, {0, 0}};
    double step[2] = {0, 0};
    for (int c = 0; c < k; ++c) {
      const int j = idx[static_cast<std::size_t>(c)];
      const double hstep = 1e-6 * std::max(1.0, x[j]);
      double xp[2] = {x[0], x[1]};
      xp[j] += hstep;
      const StationaryPoint e = pr.evaluate(xp[0], xp[1]);
      for (int r = 0; r < k; ++r) {
        const int i = idx[static_cast<std::size_t>(r)];
        jac[r][c] = (res(e, i) - res(cur, i)) / hstep;
      }
    }
    double rv[2] = {0, 0};
    for (int r = 0; r < k; ++r) rv[r] = res(cur, idx[static_cast<std::size_t>(r)]);
    bool jac_ok = true;
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < k; ++c) jac_ok = jac_ok && std::isfinite(jac[r][c]);
    }

    // Newton step; fall back to a shifted symmetric system when it is not a descent direction.
    auto solve = [&](double a00, double a01, double a10, double a11, double out[2]) {
      if (k == 1) {
        if (a00 == 0.0) return false;
        out[0] = -rv[0] / a00;
        return std::isfinite(out[0]);
      }
      const double det = a00 * a11 - a01 * a10;
      if (det == 0.0 || !std::isfinite(det)) return false;
      out[0] = -(a11 * rv[0] - a01 * rv[1]) / det;
      out[1] = -(-a10 * rv[0] + a00 * rv[1]) / det;
      return std::isfinite(out[0]) && std::isfinite(out[1]);
    };
    double dir[2] = {0, 0};
    bool ok = jac_ok && solve(jac[0][0], jac[0][1], jac[1][0], jac[1][1], dir);
    double slope = rv[0] * dir[0] + rv[1] * dir[1];
    if (!jac_ok) {
      const double len = std::hypot(rv[0], rv[1]);
      for (int r = 0; r < k; ++r) dir[r] = -rv[r] / len;
    } else if (!ok || !(slope < 0.0)) {
      const double s00 = jac[0][0], s11 = jac[1][1], s01 = 0.5 * (jac[0][1] + jac[1][0]);
      double lam_min;
      if (k == 1) {
        lam_min = s00;
      } else {
        const double tr = s00 + s11, dt = s00 * s11 - s01 * s01;
        lam_min = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - dt));
      }
      const double scale = std::max({std::abs(s00), std::abs(s11), std::abs(s01), 1e-12});
      const double shift = (lam_min > 0.0 ? 0.0 : -lam_min) + 1e-3 * scale;
      ok = solve(s00 + shift, s01, s01, s11 + shift, dir);
      slope = rv[0] * dir[0] + rv[1] * dir[1];
      if (!ok || !(slope < 0.0)) {
        for (int r = 0; r < k; ++r) dir[r] = -rv[r] / scale;
      }
    }
    for (int c = 0; c < k; ++c) step[idx[static_cast<std::size_t>(c)]] = dir[c];

    // Trust radius keeps early iterates in a sane region.
    const double radius = std::max(10.0, 2.0 * (x[0] + x[1] + 1.0 / cur.ps));
    const double norm = std::hypot(step[0], step[1]);
    if (norm > radius) {
      step[0] *= radius / norm;
      step[1] *= radius / norm;
    }

    auto rnorm = [&](const StationaryPoint& p) {
      double s = 0.0;
      for (int c = 0; c < k; ++c) s += res(p, idx[static_cast<std::size_t>(c)]) * res(p, idx[static_cast<std::size_t>(c)]);
      return std::sqrt(s);
    };
    const double r0 = rnorm(cur);
    const double noise = 1e-13 * std::max(1.0, std::abs(cur.L));
    bool accepted = false;
    bool stalled = false;
    double t = 1.0;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const double xb = fix_b ? 0.0 : std::max(0.0, x[0] + t * step[0]);
      const double xg = fix_g ? 0.0 : std::max(0.0, x[1] + t * step[1]);
      if (xb == x[0] && xg == x[1]) break;
      const StationaryPoint cand = pr.evaluate(xb, xg);
      if (cand.L < cur.L - noise || (cand.L <= cur.L + noise && rnorm(cand) < r0)) {
        // Vanishing accepted moves mean the iterate is pinned against a jump of the
        // objective (a branch change of the fixed point), not approaching a root.
        stalled = t < 1e-4 && cur.L - cand.L <= 1e-9 * std::max(1.0, std::abs(cur.L));
        x[0] = xb;
        x[1] = xg;
        cur = cand;
        accepted = true;
        break;
      }
    }
    if (!accepted || stalled) break;
  }
  cur.iterations = it;
  cur.b_at_bound = (cur.b == 0.0);
  cur.gamma_at_bound = (cur.gamma == 0.0);
  if (!cur.converged) {
    const double tol = opts.residual_tol * std::max(1.0, std::abs(cur.L));
    const bool okb = fix_b || std::abs(cur.f1) <= tol || (cur.b == 0.0 && cur.f1 > 0.0);
    const bool okg = fix_g || std::abs(cur.g) <= tol || (cur.gamma == 0.0 && cur.g > 0.0);
    cur.converged = okb && okg;
  }
  return cur;
}

std::vector<std::pair<double, double>> cold_starts(const TauProblem& pr, bool fix_b, bool fix_g,
                                                   const OptimizerOptions& opts) {
  const auto& h = pr.goal();
  const double d = pr.d();
  std::vector<double> gammas{0.0};
  if (!fix_g) {
    const double ey0 = 1.0 / pr.channel(0.0).ps;
    if (pr.coupled()) {
      for (double f : {0.3, 1.0, 3.0}) gammas.push_back(f * pr.n());
      gammas.push_back(ey0);
    } else {
      for (double f : {1.0 / 3.0, 1.0, 3.0}) gammas.push_back(f * ey0);
    }
  }
  std::vector<std::pair<double, double>> grid;
  const auto am = h.argmin_set(1e-9);
  for (double g : gammas) {
    std::vector<double> bs{0.0};
    if (!fix_b) {
      const double ey = 1.0 / pr.channel(g).ps;
      for (double x : am.ages) bs.push_back(std::max(0.0, x / d - 1.0 - 0.5 * (g + ey)));
      bs.push_back(0.5 * h.monotone_horizon() / d);
    }
    std::sort(bs.begin(), bs.end());
    bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
    for (double b : bs) grid.emplace_back(b, g);
  }
  // Screen by objective value; descend only from the most promising starts.
  std::vector<std::pair<double, std::pair<double, double>>> scored;
  for (const auto& s : grid) scored.push_back({pr.evaluate(s.first, s.second).L, s});
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < scored.size() && static_cast<int>(out.size()) < opts.max_starts; ++i) {
    out.push_back(scored[i].second);
  }
  out.emplace_back(0.0, 0.0);
  return out;
}

FixedTauSolution solve_problem(const TauProblem& pr, double tau, const OptimizerOptions& opts,
                               const std::vector<std::pair<double, double>>& warm) {
  const bool fix_b = fixes_b(opts.policy);
  const bool fix_g = fixes_gamma(opts.policy);
  FixedTauSolution out;
  out.tau = tau;

  if (pr.goal().is_constant()) {
    out.best = pr.evaluate(0.0, 0.0);
    out.best.converged = true;
    out.best.b_at_bound = out.best.gamma_at_bound = true;
    out.candidates = {out.best};
    out.channel = pr.channel(0.0);
    return out;
  }

  auto starts = warm;
  if (starts.empty()) {
    starts = cold_starts(pr, fix_b, fix_g, opts);
  } else {
    starts.emplace_back(0.0, 0.0);
  }

  std::vector<StationaryPoint> found;
  for (const auto& [b0, g0] : starts) {
    StationaryPoint sp = descend(pr, b0, g0, fix_b, fix_g, opts);
    if (!std::isfinite(sp.L)) continue;
    const bool dup = std::any_of(found.begin(), found.end(), [&](const StationaryPoint& q) {
      return std::abs(q.b - sp.b) <= 1e-6 * std::max(1.0, q.b) &&
             std::abs(q.gamma - sp.gamma) <= 1e-6 * std::max(1.0, q.gamma);
    });
    if (!dup) found.push_back(sp);
  }
  if (found.empty()) {
    // Every start is infeasible (success probability underflows the series).
    out.best = pr.evaluate(0.0, 0.0);
    out.channel = pr.channel(0.0);
    return out;
  }
  std::sort(found.begin(), found.end(), better_point);
  out.best = found.front();
  out.candidates = std::move(found);
  out.channel = pr.channel(out.best.gamma);
  return out;
}

std::vector<std::pair<double, double>> warm_from(const FixedTauSolution& s) {
  std::vector<std::pair<double, double>> w;
  for (std::size_t i = 0; i < s.candidates.size() && i < 3; ++i) w.emplace_back(s.candidates[i].b, s.candidates[i].gamma);
  return w;
}

IntegerSolution round_problem(const TauProblem& pr, double b, double gamma, Policy policy) {
  std::vector<std::int64_t> bs{0};
  std::vector<std::int64_t> gs{0};
  if (!fixes_b(policy)) {
    bs = {static_cast<std::int64_t>(std::floor(b)), static_cast<std::int64_t>(std::ceil(b)), 0};
  }
  if (!fixes_gamma(policy)) {
    const auto gf = static_cast<std::int64_t>(std::floor(gamma));
    const auto gc = static_cast<std::int64_t>(std::ceil(gamma));
    gs = {gf, gc, std::max<std::int64_t>(0, gf - 1), gc + 1};
  }
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  std::sort(gs.begin(), gs.end());
  gs.erase(std::unique(gs.begin(), gs.end()), gs.end());

  IntegerSolution best;
  best.L = std::numeric_limits<double>::infinity();
  for (auto bi : bs) {
    for (auto gi : gs) {
      const double L = pr.evaluate(static_cast<double>(bi), static_cast<double>(gi)).L;
      const double tol = kTieTol * std::max(1.0, std::abs(best.L));
      if (!std::isfinite(best.L) || L < best.L - tol) {  // ascending order settles ties
        best.b = bi;
        best.gamma = gi;
        best.L = L;
      }
    }
  }
  best.channel = pr.channel(static_cast<double>(best.gamma));
  return best;
}

OptimizationResult optimize_single(const GoalFunction& h, int n, double d, const OptimizerOptions& opts) {
  if (n < 1) throw DomainError(fmt::format("optimize: n must be >= 1 (got {})", n));
  if (!(d > 0.0)) throw DomainError("optimize: slot duration must be positive");
  constexpr double kTauCeil = 1.0 - 1e-9;

  double lo = std::min(opts.tau_lo / n, 0.5);
  double hi = std::min(opts.tau_hi / n, 0.999);
  if (!(lo < hi)) lo = 0.5 * hi;

  std::map<double, FixedTauSolution> evaluated;
  int evals = 0;
  auto objective = [&](double tau, const std::vector<std::pair<double, double>>& warm) -> const FixedTauSolution& {
    auto it = evaluated.find(tau);
    if (it != evaluated.end()) return it->second;
    TauProblem pr(h, n, tau, d, opts);
    ++evals;
    return evaluated.emplace(tau, solve_problem(pr, tau, opts, warm)).first->second;
  };
  auto nearest_warm = [&](double tau) {
    auto it = evaluated.lower_bound(tau);
    const FixedTauSolution* s = nullptr;
    if (it != evaluated.end()) s = &it->second;
    if (it != evaluated.begin()) {
      auto pv = std::prev(it);
      if (!s || std::abs(pv->first - tau) < std::abs(s->tau - tau)) s = &pv->second;
    }
    return s ? warm_from(*s) : std::vector<std::pair<double, double>>{};
  };

  // Coarse log-spaced scan.
  const int k = std::max(3, opts.tau_scan_points);
  std::vector<double> grid;
  for (int i = 0; i < k; ++i) grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (k - 1)));
  for (double t : grid) objective(t, {});
  const double ratio = std::pow(hi / lo, 1.0 / (k - 1));

  auto best_tau = [&]() {
    const FixedTauSolution* best = nullptr;
    for (const auto& [t, s] : evaluated) {
      if (!best || better_point(s.best, best->best)) best = &s;
    }
    return best->tau;
  };

  // Expand the bracket while the optimum sits on an end of the scanned range.
  for (int e = 0; e < opts.max_bracket_expansions; ++e) {
    const double bt = best_tau();
    const double first = evaluated.begin()->first, last = evaluated.rbegin()->first;
    if (bt == first && first > 1e-12) {
      objective(first / ratio, {});
    } else if (bt == last && last < kTauCeil) {
      objective(std::min({kTauCeil, last * ratio, 0.5 * (1.0 + last)}), {});
    } else {
      break;
    }
  }

  OptimizationResult result;
  {
    std::vector<double> taus;
    std::vector<double> vals;
    for (const auto& [t, s] : evaluated) {
      taus.push_back(t);
      vals.push_back(s.best.L);
    }
    for (std::size_t i = 0; i < taus.size(); ++i) {
      const bool left = (i == 0) || vals[i] <= vals[i - 1];
      const bool right = (i + 1 == taus.size()) || vals[i] <= vals[i + 1];
      if (left && right) result.tau_local_minima.push_back(taus[i]);
    }
  }

  // Golden-section refinement between the neighbours of the best scanned tau.
  {
    const double bt = best_tau();
    auto it = evaluated.find(bt);
    double a = (it == evaluated.begin()) ? bt : std::prev(it)->first;
    double c = (std::next(it) == evaluated.end()) ? bt : std::next(it)->first;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = c - invphi * (c - a);
    double x2 = a + invphi * (c - a);
    double f1 = objective(x1, nearest_warm(x1)).best.L;
    double f2 = objective(x2, nearest_warm(x2)).best.L;
    for (int iter = 0; iter < 200 && (c - a) > opts.tau_rel_tol * 0.5 * (a + c); ++iter) {
      if (f1 <= f2) {
        c = x2;
        x2 = x1;
        f2 = f1;
        x1 = c - invphi * (c - a);
        f1 = objective(x1, nearest_warm(x1)).best.L;
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + invphi * (c - a);
        f2 = objective(x2, nearest_warm(x2)).best.L;
      }
    }
  }

  const double tau_star = best_tau();
  const FixedTauSolution& sol = evaluated.at(tau_star);
  if (!std::isfinite(sol.best.L)) {
    std::string dump;
    for (const auto& [t, s] : evaluated) dump += fmt::format(" tau={:.4g}: p_s={:.3e};", t, s.channel.ps);
    throw SolverError(fmt::format("optimize: no finite objective for {} at n={}:{}", to_string(opts.policy), n, dump));
  }
  TauProblem pr(h, n, tau_star, d, opts);
  const IntegerSolution integer = round_problem(pr, sol.best.b, sol.best.gamma, opts.policy);

  result.policy = opts.policy;
  result.ps_mode = opts.ps_mode;
  result.n = n;
  result.d = d;
  result.tau_star = tau_star;
  result.continuous = sol.best;
  result.b_star = integer.b;
  result.gamma_star = integer.gamma;
  result.L_star = integer.L;
  result.ps_star = integer.channel.ps;
  result.m_hat = integer.channel.m_hat;
  result.tau_evaluations = evals;
  {
    const auto m = cycle_moments(h, static_cast<double>(integer.b), static_cast<double>(integer.gamma), d,
                                 integer.channel.ps, opts.series);
    result.h_start = m.start_penalty;
    result.end_of_cycle_penalty = m.end_penalty;
  }
  try {
    PolicyParams pp{sol.best.b, tau_star, sol.best.gamma, d};
    result.convexity = hessian(h, pp, channel_with_ps(n, tau_star, sol.best.gamma, sol.best.ps, PsSource::external),
                               opts.series);
    result.convexity_evaluated = true;
  } catch (const NonSmoothError& e) {
    result.convexity.verdict = std::string("not evaluated: ") + e.what();
  }

  if (opts.ps_mode == PsMode::self_consistent && !h.is_constant()) {
    TauProblem frozen(h, n, tau_star, d, opts, result.ps_star);
    const auto fs = solve_problem(frozen, tau_star, opts, {});
    const auto fi = round_problem(frozen, fs.best.b, fs.best.gamma, opts.policy);
    result.coupling_gap = (result.L_star - fi.L) / std::max(std::abs(result.L_star), 1e-300);
  }
  result.corollary2 = corollary2_diagnostic(result, h);
  return result;
}

}  // namespace

FixedTauSolution solve_fixed_tau(const GoalFunction& h, int n, double tau, double d, const OptimizerOptions& opts,
                                 const std::vector<std::pair<double, double>>& warm_starts) {
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("solve_fixed_tau: tau must lie in (0, 1)");
  if (n < 1) throw DomainError("solve_fixed_tau: n must be >= 1");
  if (!(d > 0.0)) throw DomainError("solve_fixed_tau: slot duration must be positive");
  TauProblem pr(h, n, tau, d, opts);
  auto sol = solve_problem(pr, tau, opts, warm_starts);
  if (!std::isfinite(sol.best.L)) {
    throw SolverError(fmt::format("solve_fixed_tau: every start is infeasible at n={}, tau={} (p_s={:.3e})", n, tau,
                                  sol.channel.ps));
  }
  return sol;
}

IntegerSolution round_to_integers(const GoalFunction& h, int n, double tau, double d, double b, double gamma,
                                  const OptimizerOptions& opts) {
  TauProblem pr(h, n, tau, d, opts);
  return round_problem(pr, std::max(0.0, b), std::max(0.0, gamma), opts.policy);
}

std::vector<OptimizationResult> optimize_policies(const GoalFunction& h, int n, double d,
                                                  const OptimizerOptions& opts) {
  std::vector<OptimizationResult> out;
  for (Policy p : {Policy::slotted_aloha, Policy::threshold_aloha, Policy::gora}) {
    OptimizerOptions o = opts;
    o.policy = p;
    OptimizationResult r = optimize_single(h, n, d, o);
    if (!out.empty()) {
      const OptimizationResult& poorer = out.back();
      const bool poorer_better = poorer.L_star < r.L_star;
      // A richer policy whose optimum lies in the poorer policy's space reports that solution.
      const bool same_space = (p == Policy::gora) ? r.b_star == 0 : r.gamma_star == 0;
      const bool near_tie = poorer.L_star <= r.L_star * (1.0 + 1e-6) + 1e-300;
      if (poorer_better || (same_space && near_tie)) {
        OptimizationResult relabeled = poorer;
        relabeled.policy = p;
        r = std::move(relabeled);
      }
    }
    out.push_back(std::move(r));
    if (p == opts.policy) break;
  }
  return out;
}

OptimizationResult optimize(const GoalFunction& h, int n, double d, const OptimizerOptions& opts) {
  return optimize_policies(h, n, d, opts).back();
}

std::vector<double> default_tau_grid(int n, double lo, double hi, int points) {
  const double a = std::min(lo / n, 0.5);
  const double b = std::min(hi / n, 0.95);
  std::vector<double> out;
  for (int i = 0; i < points; ++i) out.push_back(a + (b - a) * static_cast<double>(i) / std::max(1, points - 1));
  return out;
}

OptimizationResult brute_force_reference(const GoalFunction& h, int n, double d, const BruteForceRanges& ranges) {
  if (n < 1) throw DomainError("brute_force_reference: n must be >= 1");
  const auto taus = ranges.taus.empty() ? default_tau_grid(n, ranges.tau_lo, ranges.tau_hi, 25) : ranges.taus;
  const double points = static_cast<double>(ranges.b_max + 1) * static_cast<double>(ranges.gamma_max + 1) *
                        static_cast<double>(taus.size());
  if (points > static_cast<double>(ranges.max_points)) {
    throw RangeError(fmt::format("brute_force_reference: {:.3g} grid points exceed the limit of {}", points,
                                 ranges.max_points));
  }

  // cumulative[k] = integral of h over [0, k d], built slot by slot with compensation.
  std::vector<double> cumulative{0.0};
  double comp = 0.0;
  auto ensure = [&](std::int64_t k) {
    while (static_cast<std::int64_t>(cumulative.size()) <= k) {
      const auto j = static_cast<double>(cumulative.size() - 1);
      const double y = h.integrate(j * d, (j + 1.0) * d) - comp;
      const double t = cumulative.back() + y;
      comp = (t - cumulative.back()) - y;
      cumulative.push_back(t);
    }
  };

  OptimizationResult best;
  best.L_star = std::numeric_limits<double>::infinity();
  best.status = "ok";
  best.n = n;
  best.d = d;
  best.policy = Policy::gora;
  auto consider = [&](double L, std::int64_t b, std::int64_t g, double tau, const ChannelModel& ch) {
    const double tol = 1e-9 * std::max(1.0, std::abs(best.L_star));
    bool take = false;
    if (!std::isfinite(best.L_star) || L < best.L_star - tol) {
      take = true;
    } else if (L <= best.L_star + tol) {
      take = std::tie(b, g, tau) < std::tie(best.b_star, best.gamma_star, best.tau_star);
    }
    if (take) {
      best.L_star = L;
      best.b_star = b;
      best.gamma_star = g;
      best.tau_star = tau;
      best.ps_star = ch.ps;
      best.m_hat = ch.m_hat;
    }
  };

  for (double tau : taus) {
    for (std::int64_t g = 0; g <= ranges.gamma_max; ++g) {
      const ChannelModel ch = steady_state_ps(n, tau, static_cast<double>(g));
      const double p = ch.ps, r = 1.0 - p;
      const std::int64_t y_max = ranges.series.y_max(p);
      const std::int64_t k_top = ranges.b_max + g + 1;
      ensure(k_top + y_max + 1);
      // T(k) = sum_{y=1}^{y_max} p r^(y-1) cumulative[k + y]; walked down from k_top.
      double T = 0.0, Tc = 0.0, w = p;
      for (std::int64_t y = 1; y <= y_max; ++y) {
        const double v = w * cumulative[static_cast<std::size_t>(k_top + y)] - Tc;
        const double t = T + v;
        Tc = (t - T) - v;
        T = t;
        w *= r;
      }
      const double tail_w = (p >= 1.0) ? 0.0 : p * std::exp(static_cast<double>(y_max) * std::log1p(-p));
      const double mass = (p >= 1.0) ? 1.0 : -std::expm1(static_cast<double>(y_max) * std::log1p(-p));
      const double denom = (static_cast<double>(g) + 1.0 / p) * d;
      for (std::int64_t b = ranges.b_max; b >= 0; --b) {
        const std::int64_t kk = b + g + 1;
        const double L = (T - mass * cumulative[static_cast<std::size_t>(b + 1)]) / denom;
        consider(L, b, g, tau, ch);
        if (b > 0) {
          T = p * cumulative[static_cast<std::size_t>(kk)] + r * T -
              tail_w * cumulative[static_cast<std::size_t>(kk + y_max)];
        }
      }
    }
  }

  const auto m = cycle_moments(h, static_cast<double>(best.b_star), static_cast<double>(best.gamma_star), d,
                               best.ps_star, ranges.series);
  best.h_start = m.start_penalty;
  best.end_of_cycle_penalty = m.end_penalty;
  best.continuous.b = static_cast<double>(best.b_star);
  best.continuous.gamma = static_cast<double>(best.gamma_star);
  best.continuous.L = best.L_star;
  best.continuous.ps = best.ps_star;
  best.corollary2 = corollary2_diagnostic(best, h);
  return best;
}

Corollary2Report corollary2_diagnostic(const OptimizationResult& result, const GoalFunction& h) {
  Corollary2Report rep;
  const double ey = (result.ps_star > 0.0) ? 1.0 / result.ps_star : 0.0;
  rep.window_lo = (static_cast<double>(result.b_star) + 1.0) * result.d;
  rep.window_hi = (static_cast<double>(result.b_star + result.gamma_star) + ey + 1.0) * result.d;
  if (h.is_constant()) {
    rep.flag = Corollary2Report::Flag::inapplicable;
    rep.message = "flat goal, diagnostic inapplicable";
    return rep;
  }
  const auto am = h.argmin_set(1e-9 * std::max(1.0, std::abs(h.eval(0.0))));
  bool any = false;
  for (double x : am.ages) {
    const bool inside = rep.window_lo < x && x < rep.window_hi;
    any = any || inside;
    rep.minimizers.emplace_back(x, inside);
  }
  rep.flag = any ? Corollary2Report::Flag::contains_minimizer : Corollary2Report::Flag::excluded;
  rep.message = fmt::format("{} of {} global minimizer(s) inside ({:.6g}, {:.6g})",
                            std::count_if(rep.minimizers.begin(), rep.minimizers.end(),
                                          [](const auto& m) { return m.second; }),
                            rep.minimizers.size(), rep.window_lo, rep.window_hi);
  return rep;
}

}  // namespace gora
