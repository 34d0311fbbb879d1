#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bpdg/quadrature.hpp"

using namespace bpdg;

namespace {

double integrate_monomial(const QuadratureRule& r, int k) {
  double s = 0.0;
  for (int q = 0; q < r.n(); ++q) s += r.weights[q] * std::pow(r.points(q, 0), k);
  return s;
}

} // namespace

TEST_CASE("gauss-legendre nodes and weights match closed forms") {
  {
    auto r = quadrature_1d(QuadFamily::GaussLegendre, 1);
    REQUIRE(r.n() == 1);
    CHECK(r.points(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.weights[0] == doctest::Approx(2.0));
  }
  {
    auto r = quadrature_1d(QuadFamily::GaussLegendre, 2);
    const double x = 1.0 / std::sqrt(3.0);
    CHECK(r.points(0, 0) == doctest::Approx(-x).epsilon(1e-14));
    CHECK(r.points(1, 0) == doctest::Approx(x).epsilon(1e-14));
    CHECK(r.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(1.0).epsilon(1e-14));
  }
  {
    auto r = quadrature_1d(QuadFamily::GaussLegendre, 3);
    const double x = std::sqrt(3.0 / 5.0);
    CHECK(r.points(0, 0) == doctest::Approx(-x).epsilon(1e-14));
    CHECK(std::abs(r.points(1, 0)) < 1e-15);
    CHECK(r.points(2, 0) == doctest::Approx(x).epsilon(1e-14));
    CHECK(r.weights[0] == doctest::Approx(5.0 / 9.0).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
  }
}

TEST_CASE("lobatto nodes and weights match closed forms") {
  {
    auto r = quadrature_1d(QuadFamily::GaussLobatto, 2);
    CHECK(r.points(0, 0) == doctest::Approx(-1.0));
    CHECK(r.points(1, 0) == doctest::Approx(1.0));
    CHECK(r.weights[0] == doctest::Approx(1.0));
    CHECK(r.weights[1] == doctest::Approx(1.0));
  }
  {
    auto r = quadrature_1d(QuadFamily::GaussLobatto, 4);
    const double x = 1.0 / std::sqrt(5.0);
    REQUIRE(r.n() == 4);
    CHECK(r.points(0, 0) == doctest::Approx(-1.0));
    CHECK(r.points(1, 0) == doctest::Approx(-x).epsilon(1e-14));
    CHECK(r.points(2, 0) == doctest::Approx(x).epsilon(1e-14));
    CHECK(r.points(3, 0) == doctest::Approx(1.0));
    CHECK(r.weights[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
    CHECK(r.weights[2] == doctest::Approx(5.0 / 6.0).epsilon(1e-14));
    CHECK(r.weights[3] == doctest::Approx(1.0 / 6.0).epsilon(1e-14));
  }
  {
    auto r = quadrature_1d(QuadFamily::GaussLobatto, 5);
    const double x = std::sqrt(3.0 / 7.0);
    CHECK(r.points(1, 0) == doctest::Approx(-x).epsilon(1e-14));
    CHECK(std::abs(r.points(2, 0)) < 1e-15);
    CHECK(r.weights[0] == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(r.weights[1] == doctest::Approx(49.0 / 90.0).epsilon(1e-14));
    CHECK(r.weights[2] == doctest::Approx(32.0 / 45.0).epsilon(1e-14));
  }
}

TEST_CASE("rules integrate monomials up to their exactness degree") {
  for (int n = 1; n <= 12; ++n) {
    auto r = quadrature_1d(QuadFamily::GaussLegendre, n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      CHECK(integrate_monomial(r, k) == doctest::Approx(exact).epsilon(1e-13));
    }
  }
  for (int n = 2; n <= 12; ++n) {
    auto r = quadrature_1d(QuadFamily::GaussLobatto, n);
    for (int k = 0; k <= 2 * n - 3; ++k) {
      const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
      CHECK(integrate_monomial(r, k) == doctest::Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("weights sum to the reference measure and nodes are symmetric") {
  for (int n = 2; n <= 9; ++n) {
    auto g = quadrature_1d(QuadFamily::GaussLegendre, n);
    auto l = quadrature_1d(QuadFamily::GaussLobatto, n);
    CHECK(g.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(l.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
    for (int q = 0; q < n; ++q) {
      CHECK(g.points(q, 0) == doctest::Approx(-g.points(n - 1 - q, 0)).epsilon(1e-14));
      CHECK(l.points(q, 0) == doctest::Approx(-l.points(n - 1 - q, 0)).epsilon(1e-14));
    }
  }
}

TEST_CASE("tensor product rule orders x fastest and keeps exactness") {
  auto line = quadrature_1d(QuadFamily::GaussLegendre, 2);
  auto r = tensorize(line);
  REQUIRE(r.n() == 4);
  REQUIRE(r.dim == 2);
  CHECK(r.weights.sum() == doctest::Approx(4.0).epsilon(1e-14));
  // Row q = (qx, qy) with qx fastest.
  CHECK(r.points(0, 0) == doctest::Approx(line.points(0, 0)));
  CHECK(r.points(1, 0) == doctest::Approx(line.points(1, 0)));
  CHECK(r.points(1, 1) == doctest::Approx(line.points(0, 0)));
  CHECK(r.points(2, 1) == doctest::Approx(line.points(1, 0)));

  // Exact for x^2 y^2 on [-1,1]^2: (2/3)^2.
  double s = 0.0;
  for (int q = 0; q < r.n(); ++q)
    s += r.weights[q] * r.points(q, 0) * r.points(q, 0) * r.points(q, 1) * r.points(q, 1);
  CHECK(s == doctest::Approx(4.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("legendre evaluation matches the standard polynomials") {
  const int deg = 6;
  double P[deg + 1], dP[deg + 1];
  for (double x : {-0.9, -0.3, 0.0, 0.25, 0.7, 1.0}) {
    legendre_all(deg, x, P, dP);
    for (int k = 0; k <= deg; ++k)
      CHECK(P[k] == doctest::Approx(std::legendre(k, x)).epsilon(1e-13));
  }
  // P_k(1) = 1 and P'_k(1) = k(k+1)/2.
  legendre_all(deg, 1.0, P, dP);
  for (int k = 0; k <= deg; ++k) {
    CHECK(P[k] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(dP[k] == doctest::Approx(0.5 * k * (k + 1)).epsilon(1e-13));
  }
  // Interior derivatives against central differences.
  const double h = 1e-6;
  double Pp[deg + 1], Pm[deg + 1], scratch[deg + 1];
  for (double x : {-0.6, 0.1, 0.45}) {
    legendre_all(deg, x, P, dP);
    legendre_all(deg, x + h, Pp, scratch);
    legendre_all(deg, x - h, Pm, scratch);
    for (int k = 0; k <= deg; ++k)
      CHECK(dP[k] == doctest::Approx((Pp[k] - Pm[k]) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("invalid rule sizes are rejected") {
  CHECK_THROWS_AS(quadrature_1d(QuadFamily::GaussLegendre, 0), std::invalid_argument);
  CHECK_THROWS_AS(quadrature_1d(QuadFamily::GaussLobatto, 1), std::invalid_argument);
}
