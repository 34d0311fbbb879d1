#ifndef BPDG_QUADRATURE_HPP
#define BPDG_QUADRATURE_HPP

#include <vector>

#include "bpdg/types.hpp"

namespace bpdg {

enum class QuadFamily { GaussLegendre, GaussLobatto };

// Quadrature rule on the reference element [-1,1]^dim. Points are stored
// row-per-point; in 1D the second coordinate is unused and set to zero.
struct QuadratureRule {
  int dim = 1;
  Matrix points;   // n_points x dim
  Vector weights;  // n_points
  int n() const { return static_cast<int>(weights.size()); }
};

// n-point rule on [-1,1]. Gauss-Legendre is exact for degree 2n-1 and needs
// n >= 1; Gauss-Lobatto includes both endpoints, is exact for degree 2n-3 and
// needs n >= 2. Nodes are computed by Newton iteration on the Legendre
// recurrences and are symmetric about 0 to machine precision.
QuadratureRule quadrature_1d(QuadFamily family, int n);

// Tensor product of a 1D rule with itself; weights sum to 4.
QuadratureRule tensorize(const QuadratureRule& line);

// Legendre polynomial values P_0..P_degree at x (standard normalization,
// P_k(1) = 1). Derivatives accumulated via (2k+1) P_k = P'_{k+1} - P'_{k-1},
// which stays finite at the endpoints.
void legendre_all(int degree, double x, double* P, double* dP);

} // namespace bpdg

#endif
