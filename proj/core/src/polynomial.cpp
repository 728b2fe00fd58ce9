#include "gora/polynomial.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace gora::poly {

double horner(std::span<const double> c, double t) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
  return acc;
}

std::vector<double> derivative(std::span<const double> c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> out(c.size() - 1);
  for (std::size_t k = 1; k < c.size(); ++k) out[k - 1] = static_cast<double>(k) * c[k];
  return out;
}

void taylor_shift(std::span<const double> c, double t0, std::span<double> out) {
  assert(out.size() == c.size());
  std::copy(c.begin(), c.end(), out.begin());
  const std::size_t n = c.size();
  // Repeated synthetic division by (t - t0).
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t k = n - 1; k > i; --k) out[k - 1] += t0 * out[k];
  }
}

double integral_from_zero(std::span<const double> q, double w) {
  double acc = 0.0;
  for (std::size_t k = q.size(); k-- > 0;) acc = acc * w + q[k] / static_cast<double>(k + 1);
  return acc * w;
}

double mean_from_zero(std::span<const double> q, double w) {
  double acc = 0.0;
  for (std::size_t k = q.size(); k-- > 0;) acc = acc * w + q[k] / static_cast<double>(k + 1);
  return acc;
}

int degree(std::span<const double> c) {
  for (int k = static_cast<int>(c.size()) - 1; k >= 0; --k) {
    if (c[static_cast<std::size_t>(k)] != 0.0) return k;
  }
  return -1;
}

double root_bound(std::span<const double> c) {
  const int deg = degree(c);
  if (deg <= 0) return 0.0;
  const double lead = std::abs(c[static_cast<std::size_t>(deg)]);
  double m = 0.0;
  for (int k = 0; k < deg; ++k) m = std::max(m, std::abs(c[static_cast<std::size_t>(k)]) / lead);
  return 1.0 + m;
}

namespace {

double bisect(std::span<const double> c, double lo, double hi) {
  double flo = horner(c, lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = horner(c, mid);
    if (fm == 0.0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

void push_if_inside(std::vector<double>& out, double r, double lo, double hi) {
  if (std::isfinite(r) && r >= lo && r <= hi) out.push_back(r);
}

}  // namespace

std::vector<double> roots_in(std::span<const double> c, double lo, double hi) {
  std::vector<double> out;
  const int deg = degree(c);
  if (deg <= 0 || lo > hi) return out;

  if (deg == 1) {
    push_if_inside(out, -c[0] / c[1], lo, hi);
  } else if (deg == 2) {
    const double a = c[2], b = c[1], cc = c[0];
    const double disc = b * b - 4.0 * a * cc;
    if (disc == 0.0) {
      push_if_inside(out, -b / (2.0 * a), lo, hi);
    } else if (disc > 0.0) {
      // Stable form avoids cancellation in the smaller root.
      const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
      push_if_inside(out, q / a, lo, hi);
      if (q != 0.0) push_if_inside(out, cc / q, lo, hi);
    }
  } else {
    const auto dc = derivative(c.first(static_cast<std::size_t>(deg) + 1));
    std::vector<double> knots{lo};
    for (double r : roots_in(dc, lo, hi)) knots.push_back(r);
    knots.push_back(hi);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      const double a = knots[i], b = knots[i + 1];
      const double fa = horner(c, a), fb = horner(c, b);
      if (fa == 0.0) out.push_back(a);
      if ((fa < 0) != (fb < 0) && fa != 0.0 && fb != 0.0) out.push_back(bisect(c, a, b));
      if (i + 2 == knots.size() && fb == 0.0) out.push_back(b);
    }
  }

  std::sort(out.begin(), out.end());
  const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
  out.erase(std::unique(out.begin(), out.end(),
                        [scale](double x, double y) { return std::abs(x - y) <= 1e-12 * scale; }),
            out.end());
  return out;
}

}  // namespace gora::poly
