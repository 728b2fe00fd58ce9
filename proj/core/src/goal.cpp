#include "gora/goal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>

#include "gora/errors.hpp"
#include "gora/polynomial.hpp"

namespace gora {

namespace {

bool nearly_equal(double x, double y) {
  return std::abs(x - y) <= 1e-9 * std::max({1.0, std::abs(x), std::abs(y)});
}

void check_age(double age, const char* what) {
  if (!(age >= 0.0)) throw DomainError(fmt::format("{}: age must be >= 0 (got {})", what, age));
}

// |p(t0 + u)| <= sum e_k u^k for u >= 0 when t0 >= 0 (abs coefficients, shifted).
void add_abs_shifted(std::span<const double> c, double t0, std::vector<double>& acc) {
  std::array<double, poly::kMaxCoefficients> abs_c{};
  std::array<double, poly::kMaxCoefficients> shifted{};
  for (std::size_t k = 0; k < c.size(); ++k) abs_c[k] = std::abs(c[k]);
  poly::taylor_shift(std::span(abs_c).first(c.size()), t0, std::span(shifted).first(c.size()));
  if (acc.size() < c.size()) acc.resize(c.size(), 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) acc[k] += shifted[k];
}

}  // namespace

GoalFunction::GoalFunction(std::vector<double> breakpoints, std::vector<std::vector<double>> pieces)
    : starts_(std::move(breakpoints)), pieces_(std::move(pieces)) {
  if (starts_.empty()) throw InvariantError("goal: at least one breakpoint is required");
  if (starts_.front() != 0.0) throw InvariantError("goal: first breakpoint must be 0");
  for (std::size_t j = 1; j < starts_.size(); ++j) {
    if (!(starts_[j] > starts_[j - 1]) || !std::isfinite(starts_[j])) {
      throw InvariantError(fmt::format("goal: breakpoints not strictly ascending at index {}", j));
    }
  }
  if (pieces_.size() != starts_.size()) {
    throw InvariantError(fmt::format("goal: {} breakpoints but {} pieces", starts_.size(), pieces_.size()));
  }

  constant_ = true;
  for (std::size_t j = 0; j < pieces_.size(); ++j) {
    auto& c = pieces_[j];
    if (c.empty()) throw InvariantError(fmt::format("goal: piece {} has no coefficients", j));
    for (double v : c) {
      if (!std::isfinite(v)) throw InvariantError(fmt::format("goal: piece {} has a non-finite coefficient", j));
    }
    const int deg = poly::degree(c);
    if (deg > kMaxDegree) {
      throw InvariantError(fmt::format("goal: piece {} has degree {} > {}", j, deg, kMaxDegree));
    }
    c.resize(static_cast<std::size_t>(std::max(deg, 0)) + 1);
    max_degree_ = std::max(max_degree_, std::max(deg, 0));
    if (deg > 0) constant_ = false;
    slopes_.push_back(poly::derivative(c));
  }

  for (std::size_t j = 1; j < starts_.size(); ++j) {
    const double width = starts_[j] - starts_[j - 1];
    const double left = poly::horner(pieces_[j - 1], width);
    const double right = pieces_[j].front();
    if (!nearly_equal(left, right)) {
      throw InvariantError(fmt::format("goal: discontinuous at breakpoint {} ({} vs {})", starts_[j], left, right));
    }
    const double dl = poly::horner(slopes_[j - 1], width);
    const double dr = slopes_[j].front();
    if (!nearly_equal(dl, dr)) kinks_.push_back(starts_[j]);
  }

  const auto& tail = pieces_.back();
  const int tail_deg = poly::degree(tail);
  if (tail_deg >= 1 && tail[static_cast<std::size_t>(tail_deg)] < 0.0) {
    throw InvariantError("goal: tail not eventually non-decreasing (negative leading coefficient)");
  }

  monotone_horizon_ = starts_.back();
  const auto& tail_slope = slopes_.back();
  const auto crit = poly::roots_in(tail_slope, 0.0, poly::root_bound(tail_slope));
  if (!crit.empty()) monotone_horizon_ = starts_.back() + crit.back();
}

std::size_t GoalFunction::piece_index(double age) const {
  check_age(age, "goal");
  auto it = std::upper_bound(starts_.begin(), starts_.end(), age);
  return static_cast<std::size_t>(it - starts_.begin()) - 1;
}

double GoalFunction::eval(double age) const {
  const auto j = piece_index(age);
  return poly::horner(pieces_[j], age - starts_[j]);
}

double GoalFunction::derivative(double age) const {
  const auto j = piece_index(age);
  return poly::horner(slopes_[j], age - starts_[j]);
}

double GoalFunction::left_derivative(double age) const {
  const auto j = piece_index(age);
  if (j > 0 && age == starts_[j]) return poly::horner(slopes_[j - 1], age - starts_[j - 1]);
  return poly::horner(slopes_[j], age - starts_[j]);
}

double GoalFunction::integrate(double a, double b) const {
  check_age(a, "integrate");
  if (a > b) throw DomainError(fmt::format("integrate: lower limit {} exceeds upper limit {}", a, b));
  if (a == b) return 0.0;
  std::array<double, poly::kMaxCoefficients> q{};
  double total = 0.0;
  for (std::size_t j = piece_index(a); j < starts_.size(); ++j) {
    const double lo = std::max(a, starts_[j]);
    const double hi = (j + 1 < starts_.size()) ? std::min(b, starts_[j + 1]) : b;
    if (hi > lo) {
      const auto& c = pieces_[j];
      auto qs = std::span(q).first(c.size());
      poly::taylor_shift(c, lo - starts_[j], qs);
      total += poly::integral_from_zero(qs, hi - lo);
    }
    if (j + 1 >= starts_.size() || starts_[j + 1] >= b) break;
  }
  return total;
}

double GoalFunction::average(double a, double width) const {
  check_age(a, "average");
  if (!(width > 0.0)) throw DomainError("average: width must be positive");
  const auto j = piece_index(a);
  if (j + 1 >= starts_.size() || a + width <= starts_[j + 1]) {
    std::array<double, poly::kMaxCoefficients> q{};
    const auto& c = pieces_[j];
    auto qs = std::span(q).first(c.size());
    poly::taylor_shift(c, a - starts_[j], qs);
    return poly::mean_from_zero(qs, width);
  }
  return integrate(a, a + width) / width;
}

double GoalFunction::slot_penalty(std::int64_t k, double d) const {
  if (k < 0) throw DomainError(fmt::format("slot_penalty: discrete age must be >= 0 (got {})", k));
  if (!(d > 0.0)) throw DomainError("slot_penalty: slot duration must be positive");
  return average(static_cast<double>(k) * d, d);
}

ArgminSet GoalFunction::argmin_set(double tol) const {
  ArgminSet out;
  if (constant_) {
    out.flat = true;
    out.min_value = pieces_.front().front();
    return out;
  }
  std::vector<double> candidates(starts_.begin(), starts_.end());
  for (std::size_t j = 0; j < starts_.size(); ++j) {
    const double len = (j + 1 < starts_.size()) ? starts_[j + 1] - starts_[j] : poly::root_bound(slopes_[j]);
    for (double r : poly::roots_in(slopes_[j], 0.0, len)) candidates.push_back(starts_[j] + r);
  }
  std::vector<double> values;
  values.reserve(candidates.size());
  for (double x : candidates) values.push_back(eval(x));
  out.min_value = *std::min_element(values.begin(), values.end());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (values[i] <= out.min_value + tol) out.ages.push_back(candidates[i]);
  }
  std::sort(out.ages.begin(), out.ages.end());
  out.ages.erase(std::unique(out.ages.begin(), out.ages.end(),
                             [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, x); }),
                 out.ages.end());
  return out;
}

std::vector<double> GoalFunction::growth_envelope(double from, int order) const {
  check_age(from, "growth_envelope");
  const auto& src = (order == 0) ? pieces_ : slopes_;
  std::vector<double> env;
  if (from >= starts_.back()) {
    add_abs_shifted(src.back(), from - starts_.back(), env);
    return env;
  }
  // |age - start_j| <= age + start_j, so each piece is bounded by its abs
  // coefficients shifted by from + start_j; summing bounds the max over pieces.
  for (std::size_t j = 0; j < starts_.size(); ++j) add_abs_shifted(src[j], from + starts_[j], env);
  return env;
}

std::size_t GoalFunction::taylor_at(double age, std::span<double> out) const {
  const auto j = piece_index(age);
  const auto& c = pieces_[j];
  poly::taylor_shift(c, age - starts_[j], out.first(c.size()));
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(c.size()), out.end(), 0.0);
  return j;
}

GoalFunction make_goal(std::vector<double> breakpoints, std::vector<std::vector<double>> pieces) {
  return GoalFunction(std::move(breakpoints), std::move(pieces));
}

}  // namespace gora
