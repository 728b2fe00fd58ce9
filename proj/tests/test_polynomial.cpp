#include <cmath>
#include <vector>

#include "doctest.h"
#include "gora/polynomial.hpp"

using namespace gora;

TEST_CASE("horner evaluates ascending coefficients") {
  const std::vector<double> c{25, -10, 1};
  CHECK(poly::horner(c, 5.0) == 0.0);
  CHECK(poly::horner(c, 0.0) == 25.0);
  CHECK(poly::horner(c, 2.0) == 9.0);
}

TEST_CASE("derivative and degree") {
  const std::vector<double> c{1, 2, 3, 4};
  CHECK(poly::derivative(c) == std::vector<double>{2, 6, 12});
  CHECK(poly::degree(c) == 3);
  CHECK(poly::degree(std::vector<double>{0, 0}) == -1);
  CHECK(poly::degree(std::vector<double>{3, 0}) == 0);
}

TEST_CASE("taylor shift re-expands around a new origin") {
  const std::vector<double> c{1, -3, 0.5, 2};
  std::vector<double> q(c.size());
  poly::taylor_shift(c, 1.75, q);
  for (double u : {-2.0, -0.3, 0.0, 0.9, 4.0}) {
    CHECK(poly::horner(q, u) == doctest::Approx(poly::horner(c, 1.75 + u)).epsilon(1e-13));
  }
}

TEST_CASE("integral and mean from zero match the antiderivative") {
  const std::vector<double> c{25, -10, 1};  // (t-5)^2
  CHECK(poly::integral_from_zero(c, 1.0) == doctest::Approx(61.0 / 3.0).epsilon(1e-15));
  CHECK(poly::mean_from_zero(c, 10.0) == doctest::Approx(250.0 / 30.0).epsilon(1e-15));
}

TEST_CASE("roots in an interval") {
  SUBCASE("quadratic in closed form") {
    const auto r = poly::roots_in(std::vector<double>{6, -5, 1}, 0.0, 10.0);
    REQUIRE(r.size() == 2);
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(3.0));
  }
  SUBCASE("quintic by monotone bracketing") {
    // (t-1)(t-2)(t-3)(t-4)(t-5)
    const std::vector<double> c{-120, 274, -225, 85, -15, 1};
    const auto r = poly::roots_in(c, 0.0, 6.0);
    REQUIRE(r.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(r[static_cast<std::size_t>(k)] == doctest::Approx(k + 1.0).epsilon(1e-10));
  }
  SUBCASE("interval excludes roots") { CHECK(poly::roots_in(std::vector<double>{6, -5, 1}, 3.5, 9.0).empty()); }
}

TEST_CASE("Cauchy bound encloses every real root") {
  const std::vector<double> c{-120, 274, -225, 85, -15, 1};
  CHECK(poly::root_bound(c) >= 5.0);
}
