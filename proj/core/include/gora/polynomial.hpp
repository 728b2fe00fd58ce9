#pragma once

// Dense polynomial helpers. Coefficients are stored in ascending power order:
// c[0] + c[1] t + c[2] t^2 + ...

#include <cstddef>
#include <span>
#include <vector>

namespace gora::poly {

inline constexpr std::size_t kMaxCoefficients = 8;

double horner(std::span<const double> c, double t);

/// Coefficients of p'(t).
std::vector<double> derivative(std::span<const double> c);

/// Coefficients q of p(t0 + u) as a polynomial in u. `out` must hold c.size() entries.
void taylor_shift(std::span<const double> c, double t0, std::span<double> out);

/// Integral over [0, w] of the polynomial with coefficients q.
double integral_from_zero(std::span<const double> q, double w);

/// Mean value over [0, w] (w > 0) of the polynomial with coefficients q.
double mean_from_zero(std::span<const double> q, double w);

/// Index of the highest nonzero coefficient, or -1 for the zero polynomial.
int degree(std::span<const double> c);

/// Sorted real roots in [lo, hi]. Degree <= 2 is solved in closed form; higher
/// degrees are split into monotone runs at the roots of p' and bisected.
std::vector<double> roots_in(std::span<const double> c, double lo, double hi);

/// Upper bound on the magnitude of every real root (Cauchy bound).
double root_bound(std::span<const double> c);

}  // namespace gora::poly
