#pragma once

// Piecewise-polynomial goal (penalty) functions h(age) on [0, inf).
//
// Piece j is valid on [start_j, start_{j+1}) and the last piece on
// [start_K, inf). Each piece stores coefficients in ascending powers of the
// local offset (age - start_j), so h(age) = sum_k c_jk (age - start_j)^k.
// Evaluation is right-continuous at breakpoints; derivative() returns the
// right-hand derivative there.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gora {

struct ArgminSet {
  std::vector<double> ages;  // ascending
  double min_value = 0.0;
  bool flat = false;  // constant goal: every age is a minimizer, `ages` left empty
};

class GoalFunction {
 public:
  static constexpr int kMaxDegree = 6;

  /// Validates and builds. Throws InvariantError naming the violated invariant.
  GoalFunction(std::vector<double> breakpoints, std::vector<std::vector<double>> pieces);

  double eval(double age) const;
  double derivative(double age) const;
  /// Left-hand derivative (equals derivative() away from breakpoints; at age 0 returns the right one).
  double left_derivative(double age) const;

  /// Exact integral over [a, b], summed piece by piece.
  double integrate(double a, double b) const;
  /// Mean of h over [a, a + width], width > 0.
  double average(double a, double width) const;
  /// Average penalty during a slot whose discrete age is k: (1/d) * integral over [k d, (k+1) d].
  double slot_penalty(std::int64_t k, double d) const;

  /// All minimizers of h within `tol` of the global minimum.
  ArgminSet argmin_set(double tol = 1e-9) const;

  std::size_t piece_count() const { return starts_.size(); }
  std::size_t piece_index(double age) const;
  std::span<const double> breakpoints() const { return starts_; }
  std::span<const double> coefficients(std::size_t piece) const { return pieces_[piece]; }
  int max_degree() const { return max_degree_; }
  bool is_constant() const { return constant_; }

  /// Breakpoints where the one-sided derivatives differ.
  std::span<const double> kinks() const { return kinks_; }

  /// Age beyond which h is non-decreasing: the larger of the last breakpoint and
  /// the last critical point of the tail piece.
  double monotone_horizon() const { return monotone_horizon_; }

  /// Nonnegative coefficients e_k with |h^(order)(from + u)| <= sum_k e_k u^k for all u >= 0.
  /// order is 0 (h) or 1 (h').
  std::vector<double> growth_envelope(double from, int order) const;

  /// Fills `out` (size >= max_degree()+1) with the Taylor coefficients of h(age + u),
  /// valid while age + u stays inside the piece containing `age`. Returns the piece index.
  std::size_t taylor_at(double age, std::span<double> out) const;

 private:
  std::vector<double> starts_;
  std::vector<std::vector<double>> pieces_;
  std::vector<std::vector<double>> slopes_;  // derivative coefficients per piece
  std::vector<double> kinks_;
  int max_degree_ = 0;
  bool constant_ = false;
  double monotone_horizon_ = 0.0;
};

/// Factory mirroring the scenario-file record layout.
GoalFunction make_goal(std::vector<double> breakpoints, std::vector<std::vector<double>> pieces);

}  // namespace gora
