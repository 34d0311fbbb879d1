#include "bpdg/basis.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace bpdg {

Basis::Basis(int dim, int degree) : dim_(dim), degree_(degree) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("basis: dim must be 1 or 2");
  if (degree < 0) throw std::invalid_argument("basis: degree must be >= 0");
  n_modes_ = dim == 1 ? degree + 1 : (degree + 1) * (degree + 1);
}

void Basis::eval(const double* xi, double* values) const {
  std::vector<double> px(degree_ + 1), py(degree_ + 1);
  legendre_all(degree_, xi[0], px.data(), nullptr);
  if (dim_ == 1) {
    for (int j = 0; j <= degree_; ++j) values[j] = px[j];
    return;
  }
  legendre_all(degree_, xi[1], py.data(), nullptr);
  for (int jy = 0; jy <= degree_; ++jy)
    for (int jx = 0; jx <= degree_; ++jx)
      values[jy * (degree_ + 1) + jx] = px[jx] * py[jy];
}

void Basis::eval_grad(const double* xi, double* grads) const {
  std::vector<double> px(degree_ + 1), dpx(degree_ + 1);
  legendre_all(degree_, xi[0], px.data(), dpx.data());
  if (dim_ == 1) {
    for (int j = 0; j <= degree_; ++j) grads[j] = dpx[j];
    return;
  }
  std::vector<double> py(degree_ + 1), dpy(degree_ + 1);
  legendre_all(degree_, xi[1], py.data(), dpy.data());
  for (int jy = 0; jy <= degree_; ++jy)
    for (int jx = 0; jx <= degree_; ++jx) {
      int j = jy * (degree_ + 1) + jx;
      grads[j * 2 + 0] = dpx[jx] * py[jy];
      grads[j * 2 + 1] = px[jx] * dpy[jy];
    }
}

Matrix Basis::values_at(const Matrix& points) const {
  const int nq = static_cast<int>(points.rows());
  Matrix table(nq, n_modes_);
  std::vector<double> vals(n_modes_);
  for (int q = 0; q < nq; ++q) {
    double xi[2] = {points(q, 0), points.cols() > 1 ? points(q, 1) : 0.0};
    eval(xi, vals.data());
    for (int j = 0; j < n_modes_; ++j) table(q, j) = vals[j];
  }
  return table;
}

std::array<Matrix, 2> Basis::grads_at(const Matrix& points) const {
  const int nq = static_cast<int>(points.rows());
  std::array<Matrix, 2> tables = {Matrix(nq, n_modes_), Matrix(nq, n_modes_)};
  std::vector<double> g(static_cast<std::size_t>(n_modes_) * 2);
  for (int q = 0; q < nq; ++q) {
    double xi[2] = {points(q, 0), points.cols() > 1 ? points(q, 1) : 0.0};
    eval_grad(xi, g.data());
    for (int j = 0; j < n_modes_; ++j) {
      tables[0](q, j) = g[j * dim_ + 0];
      tables[1](q, j) = dim_ == 2 ? g[j * dim_ + 1] : 0.0;
    }
  }
  return tables;
}

MassMatrix assemble_mass(const Mesh& mesh, const Basis& basis,
                         const QuadratureRule& rule) {
  if (rule.dim != mesh.dim || basis.dim() != mesh.dim)
    throw std::invalid_argument("assemble_mass: dimension mismatch");
  const int nm = basis.n_modes();
  const Matrix phi = basis.values_at(rule.points);

  // Reference Gram matrix; the rule must reproduce orthogonality.
  Matrix gram = Matrix::Zero(nm, nm);
  for (int q = 0; q < rule.n(); ++q)
    gram += rule.weights[q] * (phi.row(q).transpose() * phi.row(q));
  for (int i = 0; i < nm; ++i)
    for (int j = 0; j < nm; ++j)
      if (i != j && std::abs(gram(i, j)) > 1e-12 * std::abs(gram(i, i)))
        throw std::invalid_argument(
            "assemble_mass: quadrature is not exact for degree 2p");

  MassMatrix mass;
  mass.n_modes = nm;
  mass.diag.resize(static_cast<Eigen::Index>(mesh.n_elements()) * nm);
  const double two_pow_dim = mesh.dim == 1 ? 2.0 : 4.0;
  for (int K = 0; K < mesh.n_elements(); ++K) {
    const double jac = mesh.elements[K].measure(mesh.dim) / two_pow_dim;
    for (int j = 0; j < nm; ++j) mass.diag[K * nm + j] = gram(j, j) * jac;
  }
  return mass;
}

} // namespace bpdg
