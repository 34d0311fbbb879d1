#include "bpdg/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace bpdg {

void legendre_all(int degree, double x, double* P, double* dP) {
  P[0] = 1.0;
  if (dP) dP[0] = 0.0;
  if (degree == 0) return;
  P[1] = x;
  if (dP) dP[1] = 1.0;
  for (int k = 1; k < degree; ++k) {
    P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1);
    if (dP) dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k];
  }
}

namespace {

// Newton iteration for the roots of P_n; standard Chebyshev initial guesses.
std::vector<double> legendre_roots(int n) {
  std::vector<double> roots(n);
  std::vector<double> P(n + 1), dP(n + 1);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (4.0 * (i + 1) - 1.0) / (4.0 * n + 2.0));
    for (int it = 0; it < 100; ++it) {
      legendre_all(n, x, P.data(), dP.data());
      double dx = P[n] / dP[n];
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    roots[i] = x;
  }
  // Enforce exact symmetry about the origin.
  for (int i = 0; i < n / 2; ++i) {
    double s = 0.5 * (roots[i] - roots[n - 1 - i]);
    roots[i] = s;
    roots[n - 1 - i] = -s;
  }
  if (n % 2 == 1) roots[n / 2] = 0.0;
  return roots;
}

// Roots of P'_{n-1} (interior Lobatto nodes). Newton on P' with
// P'' from the Legendre ODE (1-x^2) P'' = 2 x P' - k(k+1) P.
std::vector<double> lobatto_interior(int n) {
  const int k = n - 1;
  std::vector<double> roots(k - 1);
  std::vector<double> P(k + 1), dP(k + 1);
  for (int i = 1; i < k; ++i) {
    // Interlacing initial guess between Chebyshev-Lobatto nodes.
    double x = std::cos(M_PI * i / static_cast<double>(k));
    for (int it = 0; it < 100; ++it) {
      legendre_all(k, x, P.data(), dP.data());
      double d2 = (2.0 * x * dP[k] - k * (k + 1.0) * P[k]) / (1.0 - x * x);
      double dx = dP[k] / d2;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    roots[i - 1] = x;
  }
  for (std::size_t i = 0; i < roots.size() / 2; ++i) {
    double s = 0.5 * (roots[i] - roots[roots.size() - 1 - i]);
    roots[i] = s;
    roots[roots.size() - 1 - i] = -s;
  }
  if (roots.size() % 2 == 1) roots[roots.size() / 2] = 0.0;
  return roots;
}

} // namespace

QuadratureRule quadrature_1d(QuadFamily family, int n) {
  QuadratureRule rule;
  rule.dim = 1;
  rule.points.resize(n, 1);
  rule.weights.resize(n);

  if (family == QuadFamily::GaussLegendre) {
    if (n < 1) throw std::invalid_argument("Gauss-Legendre rule needs n >= 1");
    auto roots = legendre_roots(n);
    std::vector<double> P(n + 1), dP(n + 1);
    // Ascending node order.
    for (int i = 0; i < n; ++i) {
      double x = roots[n - 1 - i];
      legendre_all(n, x, P.data(), dP.data());
      rule.points(i, 0) = x;
      rule.weights[i] = 2.0 / ((1.0 - x * x) * dP[n] * dP[n]);
    }
  } else {
    if (n < 2) throw std::invalid_argument("Gauss-Lobatto rule needs n >= 2");
    const int k = n - 1;
    std::vector<double> P(k + 1), dP(k + 1);
    auto interior = lobatto_interior(n);
    rule.points(0, 0) = -1.0;
    rule.points(n - 1, 0) = 1.0;
    for (int i = 1; i < n - 1; ++i) rule.points(i, 0) = interior[n - 2 - i];
    for (int i = 0; i < n; ++i) {
      double x = rule.points(i, 0);
      legendre_all(k, x, P.data(), dP.data());
      rule.weights[i] = 2.0 / (k * (k + 1.0) * P[k] * P[k]);
    }
  }
  return rule;
}

QuadratureRule tensorize(const QuadratureRule& line) {
  if (line.dim != 1) throw std::invalid_argument("tensorize expects a 1D rule");
  const int n = line.n();
  QuadratureRule rule;
  rule.dim = 2;
  rule.points.resize(n * n, 2);
  rule.weights.resize(n * n);
  // x index fastest, matching the tensor basis ordering.
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      int q = j * n + i;
      rule.points(q, 0) = line.points(i, 0);
      rule.points(q, 1) = line.points(j, 0);
      rule.weights[q] = line.weights[i] * line.weights[j];
    }
  }
  return rule;
}

} // namespace bpdg
