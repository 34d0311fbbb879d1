#include "bpdg/kkt.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace bpdg {

KktSystem::KktSystem(InnerProblem inner, ConstraintSet constraints)
    : inner_(std::move(inner)), cons_(std::move(constraints)) {
  if (!inner_.residual || !inner_.jacobian)
    throw std::invalid_argument("kkt: inner residual and jacobian required");
  if (cons_.m() > 0 && cons_.n() != inner_.n)
    throw std::invalid_argument("kkt: constraint width mismatch");
  if (inner_.l() > 0 && !inner_.eq_jacobian)
    throw std::invalid_argument("kkt: equality rows need eq_jacobian");
  for (int r : inner_.eq_rows)
    if (r < 0 || r >= inner_.n)
      throw std::invalid_argument("kkt: equality row index out of range");
}

Vector KktSystem::residual(const Vector& z) const {
  const int nn = n(), ll = l(), mm = m();
  const Vector x = z.head(nn);
  Vector F(size());

  const Vector Lx = inner_.residual(x);
  Vector lag = Lx;
  if (ll > 0) {
    const Vector mu = z.segment(nn, ll);
    if (mu.lpNorm<Eigen::Infinity>() != 0.0)
      lag += inner_.eq_jacobian(x).transpose() * mu;
  }
  if (mm > 0) {
    const Vector lambda = z.tail(mm);
    lag += cons_.A.transpose() * lambda;
  }
  F.head(nn) = lag;

  for (int k = 0; k < ll; ++k) F[nn + k] = -Lx[inner_.eq_rows[k]];

  if (mm > 0) {
    const Vector g = cons_.values(x);
    const Vector lambda = z.tail(mm);
    for (int j = 0; j < mm; ++j) F[nn + ll + j] = std::min(-g[j], lambda[j]);
  }
  return F;
}

KktSystem::Classification KktSystem::classify(const Vector& z,
                                              double delta) const {
  Classification out;
  const int mm = m();
  if (mm == 0) return out;
  const Vector g = cons_.values(z.head(n()));
  const Vector lambda = z.tail(mm);
  for (int j = 0; j < mm; ++j) {
    const double slack = lambda[j] + g[j];  // lambda_j - (-g_j)
    if (slack > delta)
      out.alpha.push_back(j);
    else if (slack < -delta)
      out.gamma.push_back(j);
    else
      out.beta.push_back(j);
  }
  return out;
}

Vector KktSystem::derivative(const Vector& z, const Vector& d, Kernel kernel,
                             double delta) const {
  const int nn = n(), ll = l(), mm = m();
  const Vector x = z.head(nn);
  const Vector u = d.head(nn);
  Vector out(size());

  Vector lag = inner_.jacobian(x) * u;
  if (ll > 0) {
    const Vector mu = z.segment(nn, ll);
    const Vector w_mu = d.segment(nn, ll);
    const SpMat Dh = inner_.eq_jacobian(x);
    lag += Dh.transpose() * w_mu;
    if (inner_.eq_curvature && mu.lpNorm<Eigen::Infinity>() != 0.0)
      lag += inner_.eq_curvature(x, mu) * u;
    out.segment(nn, ll) = -(Dh * u);
  }
  if (mm > 0) {
    const Vector w = d.tail(mm);
    lag += cons_.A.transpose() * w;
    const Vector s = -(cons_.A * u);  // -Dg . u per row
    const Vector g = cons_.values(x);
    const Vector lambda = z.tail(mm);
    for (int j = 0; j < mm; ++j) {
      const double slack = lambda[j] + g[j];
      double v;
      if (slack > delta) {
        v = s[j];
      } else if (slack < -delta) {
        v = w[j];
      } else if (kernel == Kernel::OneSided) {
        v = std::min(s[j], w[j]);
      } else {
        const double Fj = std::min(-g[j], lambda[j]);
        v = Fj > 0.0 ? std::max(s[j], w[j]) : std::min(s[j], w[j]);
      }
      out[nn + ll + j] = v;
    }
  }
  out.head(nn) = lag;
  return out;
}

Vector KktSystem::directional(const Vector& z, const Vector& d) const {
  return derivative(z, d, Kernel::OneSided, 0.0);
}

Vector KktSystem::clarke(const Vector& z, const Vector& d) const {
  return derivative(z, d, Kernel::Clarke, 0.0);
}

Vector KktSystem::quasi_directional(const Vector& z, const Vector& d,
                                    double delta) const {
  return derivative(z, d, Kernel::Quasi, delta);
}

SpMat KktSystem::quasi_jacobian(const Vector& z, const Vector& d,
                                double delta) const {
  const int nn = n(), ll = l(), mm = m();
  const Vector x = z.head(nn);
  std::vector<Triplet> trip;

  {
    SpMat DL = inner_.jacobian(x);
    if (ll > 0) {
      const Vector mu = z.segment(nn, ll);
      if (inner_.eq_curvature && mu.lpNorm<Eigen::Infinity>() != 0.0)
        DL += inner_.eq_curvature(x, mu);
    }
    for (int k = 0; k < DL.outerSize(); ++k)
      for (SpMat::InnerIterator it(DL, k); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                          it.value());
  }

  if (ll > 0) {
    const SpMat Dh = inner_.eq_jacobian(x);
    for (int k = 0; k < Dh.outerSize(); ++k)
      for (SpMat::InnerIterator it(Dh, k); it; ++it) {
        const int r = static_cast<int>(it.row());
        const int c = static_cast<int>(it.col());
        trip.emplace_back(c, nn + r, it.value());    // Dh^T in the x rows
        trip.emplace_back(nn + r, c, -it.value());   // -Dh rows
      }
  }

  if (mm > 0) {
    const Vector u = d.head(nn);
    const Vector w = d.tail(mm);
    const Vector s = -(cons_.A * u);
    const Vector g = cons_.values(x);
    const Vector lambda = z.tail(mm);
    std::vector<bool> unit_row(mm, false);
    for (int j = 0; j < mm; ++j) {
      const double slack = lambda[j] + g[j];
      if (slack > delta) {
        unit_row[j] = false;
      } else if (slack < -delta) {
        unit_row[j] = true;
      } else {
        const double Fj = std::min(-g[j], lambda[j]);
        const bool takes_s = Fj > 0.0 ? s[j] > w[j] : s[j] <= w[j];
        unit_row[j] = !takes_s;
      }
      if (unit_row[j]) trip.emplace_back(nn + ll + j, nn + ll + j, 1.0);
    }
    for (int k = 0; k < cons_.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(cons_.A, k); it; ++it) {
        const int j = static_cast<int>(it.row());
        const int c = static_cast<int>(it.col());
        trip.emplace_back(c, nn + ll + j, it.value());  // Dg^T in the x rows
        if (!unit_row[j]) trip.emplace_back(nn + ll + j, c, -it.value());
      }
  }

  SpMat G(size(), size());
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

namespace {

// Square system for one fixed active set: stationarity, the equality rows,
// and g_S = 0. Unknowns are [x; mu; lambda_S].
struct PartitionSystem {
  const KktSystem& sys;
  const Matrix& Ad;  // dense copy of the constraint rows
  const std::vector<int>& active;

  int dim() const {
    return sys.n() + sys.l() + static_cast<int>(active.size());
  }

  Vector residual(const Vector& y) const {
    const InnerProblem& inner = sys.inner();
    const int nn = sys.n(), ll = sys.l();
    const int na = static_cast<int>(active.size());
    const Vector x = y.head(nn);

    Vector r(dim());
    const Vector Lx = inner.residual(x);
    Vector lag = Lx;
    if (ll > 0) lag += inner.eq_jacobian(x).transpose() * y.segment(nn, ll);
    const Vector g = na > 0 ? sys.constraints().values(x) : Vector();
    for (int a = 0; a < na; ++a) {
      const int j = active[a];
      lag += y[nn + ll + a] * Ad.row(j).transpose();
      r[nn + ll + a] = g[j];
    }
    r.head(nn) = lag;
    for (int k = 0; k < ll; ++k) r[nn + k] = Lx[inner.eq_rows[k]];
    return r;
  }

  Matrix jacobian(const Vector& y) const {
    const InnerProblem& inner = sys.inner();
    const int nn = sys.n(), ll = sys.l();
    const int na = static_cast<int>(active.size());
    const Vector x = y.head(nn);

    Matrix J = Matrix::Zero(dim(), dim());
    J.topLeftCorner(nn, nn) = Matrix(inner.jacobian(x));
    if (ll > 0) {
      const Vector mu = y.segment(nn, ll);
      if (inner.eq_curvature && mu.lpNorm<Eigen::Infinity>() != 0.0)
        J.topLeftCorner(nn, nn) += Matrix(inner.eq_curvature(x, mu));
      Matrix Dh(inner.eq_jacobian(x));
      J.block(0, nn, nn, ll) = Dh.transpose();
      J.block(nn, 0, ll, nn) = Dh;
    }
    for (int a = 0; a < na; ++a) {
      const int j = active[a];
      J.block(0, nn + ll + a, nn, 1) = Ad.row(j).transpose();
      J.block(nn + ll + a, 0, 1, nn) = Ad.row(j);
    }
    return J;
  }
};

} // namespace

Vector oracle_solve_small(const KktSystem& sys, const Vector& x0) {
  const int nn = sys.n(), ll = sys.l(), mm = sys.m();
  if (mm > 20)
    throw std::invalid_argument("oracle_solve_small: too many constraints");
  if (x0.size() != 0 && x0.size() != nn)
    throw std::invalid_argument("oracle_solve_small: seed size mismatch");
  const double tol = 1e-10;
  const Matrix Ad(sys.constraints().A);

  for (std::uint32_t mask = 0; mask < (1u << mm); ++mask) {
    std::vector<int> active;
    for (int j = 0; j < mm; ++j)
      if (mask & (1u << j)) active.push_back(j);
    const PartitionSystem part{sys, Ad, active};
    const int na = static_cast<int>(active.size());

    Vector y = Vector::Zero(part.dim());
    if (x0.size() > 0) y.head(nn) = x0;
    bool solved = false;
    for (int it = 0; it < 60; ++it) {
      const Vector r = part.residual(y);
      if (!r.allFinite()) break;
      if (r.lpNorm<Eigen::Infinity>() <= tol) {
        solved = true;
        break;
      }
      Eigen::FullPivLU<Matrix> lu(part.jacobian(y));
      if (!lu.isInvertible()) break;
      const Vector step = lu.solve(-r);
      if (!step.allFinite()) break;
      y += step;
    }
    if (!solved) continue;

    Vector lambda = Vector::Zero(mm);
    for (int a = 0; a < na; ++a) lambda[active[a]] = y[nn + ll + a];
    bool valid = true;
    if (mm > 0) {
      const Vector g = sys.constraints().values(y.head(nn));
      for (int j = 0; j < mm; ++j) {
        if (lambda[j] < -tol || g[j] > tol ||
            std::abs(g[j] * lambda[j]) > tol) {
          valid = false;
          break;
        }
      }
    }
    if (!valid) continue;

    Vector z(sys.size());
    z.head(nn + ll) = y.head(nn + ll);
    z.tail(mm) = lambda;
    return z;
  }
  throw std::runtime_error("no KKT point found");
}

} // namespace bpdg
