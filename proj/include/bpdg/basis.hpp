#ifndef BPDG_BASIS_HPP
#define BPDG_BASIS_HPP

#include <array>

#include "bpdg/mesh.hpp"
#include "bpdg/quadrature.hpp"
#include "bpdg/types.hpp"

namespace bpdg {

// Tensor-product Legendre modal basis on the reference element [-1,1]^dim,
// standard normalization (constant mode identically 1, P_k(1) = 1). Modes are
// ordered with the x degree fastest, so mode 0 is the constant and the first
// coefficient of an expansion is the element mean.
class Basis {
 public:
  Basis(int dim, int degree);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int n_modes() const { return n_modes_; }

  // values: n_modes entries; grads: n_modes x dim (reference derivatives).
  void eval(const double* xi, double* values) const;
  void eval_grad(const double* xi, double* grads) const;

  // Tabulated values at every point of a rule/point set (n_points x n_modes).
  Matrix values_at(const Matrix& points) const;
  std::array<Matrix, 2> grads_at(const Matrix& points) const;

 private:
  int dim_;
  int degree_;
  int n_modes_;
};

// Block-diagonal mass matrix for one scalar field; with the orthogonal basis
// and a rule exact for degree 2p the blocks are diagonal, so only the
// diagonal is stored, ordered element-major: entry(K, j) = diag[K*n_modes+j].
struct MassMatrix {
  Vector diag;
  int n_modes = 0;
  double entry(int element, int mode) const { return diag[element * n_modes + mode]; }
};

// Requires a volume rule exact for polynomials of degree 2p on the reference
// element (checked against the basis Gram matrix to 1e-12 relative).
MassMatrix assemble_mass(const Mesh& mesh, const Basis& basis,
                         const QuadratureRule& rule);

} // namespace bpdg

#endif
