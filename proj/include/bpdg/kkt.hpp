#pragma once

#include <functional>
#include <vector>

#include "bpdg/types.hpp"

namespace bpdg {

// Affine inequality rows g(x) = A x + c <= 0, componentwise.
struct ConstraintSet {
  SpMat A;
  Vector c;

  // Where each row came from, for diagnostics and multiplier export.
  struct PointInfo {
    int element = -1;
    int point = -1;
    bool lower = true;
    double x[2] = {0.0, 0.0};
  };
  std::vector<PointInfo> info;  // empty or one entry per row

  int m() const { return static_cast<int>(c.size()); }
  int n() const { return static_cast<int>(A.cols()); }
  Vector values(const Vector& x) const { return A * x + c; }
};

// Smooth inner system L(x) = 0. Equality constraints are rows of L selected
// by index, so their residual values agree bitwise with the corresponding
// entries of L. eq_jacobian returns those rows of DL; eq_curvature returns
// d/dx (Dh(x)^T mu) and may be left empty when Dh is constant.
struct InnerProblem {
  int n = 0;
  std::function<Vector(const Vector&)> residual;
  std::function<SpMat(const Vector&)> jacobian;
  std::vector<int> eq_rows;
  std::function<SpMat(const Vector&)> eq_jacobian;
  std::function<SpMat(const Vector&, const Vector&)> eq_curvature;

  int l() const { return static_cast<int>(eq_rows.size()); }
};

// Stationarity system for min-type complementarity:
//   F(z) = [ L(x) + Dh(x)^T mu + Dg^T lambda ;  -h(x) ;  min(-g(x), lambda) ]
// with z = (x, mu, lambda). The min rows make F piecewise differentiable;
// the kernels below provide the one-sided, Clarke and quasi-directional
// derivatives plus the matrix representative used by the Newton solver.
class KktSystem {
 public:
  KktSystem(InnerProblem inner, ConstraintSet constraints);

  int n() const { return inner_.n; }
  int l() const { return inner_.l(); }
  int m() const { return cons_.m(); }
  int size() const { return n() + l() + m(); }

  const InnerProblem& inner() const { return inner_; }
  const ConstraintSet& constraints() const { return cons_; }

  Vector residual(const Vector& z) const;

  // Index sets by sign of lambda_j + g_j: alpha strictly positive, beta the
  // kink, gamma strictly negative. The delta variant widens beta to a band.
  struct Classification {
    std::vector<int> alpha, beta, gamma;
  };
  Classification classify(const Vector& z, double delta = 0.0) const;

  Vector directional(const Vector& z, const Vector& d) const;
  Vector clarke(const Vector& z, const Vector& d) const;
  Vector quasi_directional(const Vector& z, const Vector& d, double delta) const;

  // Matrix G with G * d == quasi_directional(z, d, delta).
  SpMat quasi_jacobian(const Vector& z, const Vector& d, double delta) const;

 private:
  enum class Kernel { OneSided, Clarke, Quasi };
  Vector derivative(const Vector& z, const Vector& d, Kernel kernel,
                    double delta) const;

  InnerProblem inner_;
  ConstraintSet cons_;
};

// Reference solver for small instances (m, n <= 12). Enumerates the 2^m
// active/inactive partitions in ascending bitmask order; for each, solves
// the equality-constrained square system by dense factorization (with a
// plain Newton iteration when the inner residual is nonlinear) and returns
// the first point with lambda >= 0, g <= 0 and complementarity satisfied to
// 1e-10. Throws std::runtime_error("no KKT point found") otherwise. x0
// seeds the primal variables; empty means zero.
Vector oracle_solve_small(const KktSystem& sys, const Vector& x0 = Vector());

} // namespace bpdg
