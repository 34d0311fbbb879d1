#include "bpdg/newton.hpp"

#include <Eigen/Cholesky>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bpdg {

namespace {

double pow2_round(double v) {
  // Nearest power of two to sqrt(v), used to damp a row with maximum v.
  return std::exp2(std::round(0.5 * std::log2(v)));
}

bool within_band(const Vector& rowmax) {
  for (int i = 0; i < rowmax.size(); ++i)
    if (rowmax[i] != 0.0 && (rowmax[i] < 0.5 || rowmax[i] > 2.0)) return false;
  return true;
}

} // namespace

Vector newton_scaling(const Vector& z0, const Vector& typical) {
  Vector s(z0.size());
  for (int j = 0; j < z0.size(); ++j) {
    const double typ = typical.size() > 0 ? typical[j] : 1.0;
    s[j] = std::max(std::abs(z0[j]), typ);
  }
  return s;
}

Vector symmetric_equilibrate(const SpMat& N, int max_sweeps) {
  Vector d = Vector::Ones(N.rows());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Vector rowmax = Vector::Zero(N.rows());
    for (int k = 0; k < N.outerSize(); ++k)
      for (SpMat::InnerIterator it(N, k); it; ++it) {
        const double v = std::abs(d[it.row()] * it.value() * d[it.col()]);
        rowmax[it.row()] = std::max(rowmax[it.row()], v);
      }
    if (within_band(rowmax)) break;
    for (int i = 0; i < d.size(); ++i)
      if (rowmax[i] != 0.0) d[i] /= pow2_round(rowmax[i]);
  }
  return d;
}

Vector symmetric_equilibrate(const Matrix& N, int max_sweeps) {
  Vector d = Vector::Ones(N.rows());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Vector rowmax = Vector::Zero(N.rows());
    for (int i = 0; i < N.rows(); ++i)
      for (int j = 0; j < N.cols(); ++j)
        rowmax[i] = std::max(rowmax[i], std::abs(d[i] * N(i, j) * d[j]));
    if (within_band(rowmax)) break;
    for (int i = 0; i < d.size(); ++i)
      if (rowmax[i] != 0.0) d[i] /= pow2_round(rowmax[i]);
  }
  return d;
}

EquilibrateResult equilibrate_linf(const Matrix& M, int max_sweeps) {
  EquilibrateResult res;
  res.row = Vector::Ones(M.rows());
  res.col = Vector::Ones(M.cols());

  Vector rowmax0 = Vector::Zero(M.rows());
  Vector colmax0 = Vector::Zero(M.cols());
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) {
      const double v = std::abs(M(i, j));
      rowmax0[i] = std::max(rowmax0[i], v);
      colmax0[j] = std::max(colmax0[j], v);
    }
  for (int i = 0; i < M.rows(); ++i)
    if (rowmax0[i] == 0.0) res.zero_rows.push_back(i);
  for (int j = 0; j < M.cols(); ++j)
    if (colmax0[j] == 0.0) res.zero_cols.push_back(j);

  const bool symmetric =
      M.rows() == M.cols() && M.isApprox(M.transpose(), 0.0);
  if (symmetric) {
    res.row = symmetric_equilibrate(M, max_sweeps);
    res.col = res.row;
    return res;
  }

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    Vector rowmax = Vector::Zero(M.rows());
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        rowmax[i] = std::max(rowmax[i],
                             std::abs(res.row[i] * M(i, j) * res.col[j]));
    for (int i = 0; i < M.rows(); ++i)
      if (rowmax[i] != 0.0 && (rowmax[i] < 0.5 || rowmax[i] > 2.0))
        res.row[i] /= pow2_round(rowmax[i] * rowmax[i]);
    Vector colmax = Vector::Zero(M.cols());
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        colmax[j] = std::max(colmax[j],
                             std::abs(res.row[i] * M(i, j) * res.col[j]));
    for (int j = 0; j < M.cols(); ++j)
      if (colmax[j] != 0.0 && (colmax[j] < 0.5 || colmax[j] > 2.0))
        res.col[j] /= pow2_round(colmax[j] * colmax[j]);
    Vector rowcheck = Vector::Zero(M.rows());
    for (int i = 0; i < M.rows(); ++i)
      for (int j = 0; j < M.cols(); ++j)
        rowcheck[i] = std::max(rowcheck[i],
                               std::abs(res.row[i] * M(i, j) * res.col[j]));
    if (within_band(rowcheck) && within_band(colmax)) break;
  }
  return res;
}

EquilibrateResult equilibrate_linf(const SpMat& M, int max_sweeps) {
  return equilibrate_linf(Matrix(M), max_sweeps);
}

namespace {

Vector min_norm_fallback(const SpMat& G, const Vector& F, int* cod_fallbacks) {
  if (cod_fallbacks) ++*cod_fallbacks;
  // Tikhonov limit first: a diagonal shift at working precision restores a
  // definite factorization, and for consistent singular systems the shifted
  // solution matches the minimum-norm one to O(shift/sigma^2). Degenerate
  // active sets make this path hot, so the dense decomposition is reserved
  // for the rare case where even the shifted factorization degenerates.
  {
    const SpMat N0 = SpMat(G.transpose() * G);
    double dmax = 0.0;
    for (int k = 0; k < N0.outerSize(); ++k)
      for (SpMat::InnerIterator it(N0, k); it; ++it)
        if (it.row() == it.col()) dmax = std::max(dmax, std::abs(it.value()));
    const double shift = 1e-13 * std::max(dmax, 1.0);
    SpMat N = N0;
    SpMat I(N.rows(), N.cols());
    I.setIdentity();
    N += shift * I;
    Eigen::SimplicialLDLT<SpMat> ldlt(N);
    if (ldlt.info() == Eigen::Success) {
      const Vector rhs = -(G.transpose() * F);
      Vector h = ldlt.solve(rhs);
      if (h.allFinite()) {
        // Refine against the unshifted matrix to remove the O(shift) bias;
        // accept a pass only when it reduces the normal-equations residual,
        // so the result is never worse than the plain shifted solve.
        Vector r = rhs - N0 * h;
        for (int pass = 0; pass < 3; ++pass) {
          if (!(r.norm() > 1e-15 * rhs.norm())) break;
          const Vector h2 = h + ldlt.solve(r);
          if (!h2.allFinite()) break;
          const Vector r2 = rhs - N0 * h2;
          if (!(r2.norm() < r.norm())) break;
          h = h2;
          r = r2;
        }
        return h;
      }
    }
  }
  if (G.rows() <= 2000) {
    Matrix Gd(G);
    return Gd.completeOrthogonalDecomposition().solve(-F);
  }
  // CG started from zero stays in the row space, so the limit is the
  // minimum-norm least-squares solution.
  Eigen::LeastSquaresConjugateGradient<SpMat> cg(G);
  cg.setTolerance(1e-14);
  cg.setMaxIterations(8 * G.rows());
  return cg.solve(-F);
}

// The normal matrix is positive semi-definite, so a sound factorization has
// all pivots positive and commensurate. Pivots at roundoff scale mean the
// matrix is numerically singular even when the factorization reports success;
// solving through them yields finite but meaningless directions.
bool pivots_degenerate(const Vector& D) {
  if (D.size() == 0) return true;
  const double dmax = D.cwiseAbs().maxCoeff();
  return !(dmax > 0) || D.minCoeff() < 1e-14 * dmax;
}

Vector dense_direction(const SpMat& G, const Vector& F, double reg,
                       const NewtonConfig& cfg, int* cod_fallbacks) {
  Matrix Gd(G);
  Matrix N = Gd.transpose() * Gd;
  N.diagonal().array() += reg;
  Vector rhs = -(Gd.transpose() * F);
  Vector d = cfg.equilibrate ? symmetric_equilibrate(N) : Vector::Ones(N.rows());
  Matrix Ns = d.asDiagonal() * N * d.asDiagonal();
  Eigen::LDLT<Matrix> ldlt(Ns);
  Vector h;
  if (ldlt.info() == Eigen::Success && !pivots_degenerate(ldlt.vectorD())) {
    h = d.cwiseProduct(ldlt.solve(d.cwiseProduct(rhs)));
    if (h.allFinite()) return h;
  }
  return min_norm_fallback(G, F, cod_fallbacks);
}

Vector sparse_direction(const SpMat& G, const Vector& F, double reg,
                        const NewtonConfig& cfg, int* cod_fallbacks) {
  SpMat N = SpMat(G.transpose() * G);
  SpMat I(N.rows(), N.cols());
  I.setIdentity();
  N += reg * I;
  Vector rhs = -(G.transpose() * F);
  Vector d = cfg.equilibrate ? symmetric_equilibrate(N) : Vector::Ones(N.rows());
  std::vector<Triplet> trip;
  trip.reserve(N.nonZeros());
  for (int k = 0; k < N.outerSize(); ++k)
    for (SpMat::InnerIterator it(N, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        d[it.row()] * it.value() * d[it.col()]);
  SpMat Ns(N.rows(), N.cols());
  Ns.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SpMat> ldlt(Ns);
  if (ldlt.info() == Eigen::Success &&
      !pivots_degenerate(ldlt.vectorD().diagonal())) {
    Vector h = d.cwiseProduct(ldlt.solve(d.cwiseProduct(rhs)));
    if (h.allFinite()) return h;
  }
  return min_norm_fallback(G, F, cod_fallbacks);
}

} // namespace

Vector gauss_newton_direction(const SpMat& G, const Vector& F, double reg,
                              const NewtonConfig& cfg, int* cod_fallbacks) {
  if (G.rows() != F.size())
    throw std::invalid_argument("newton: matrix and residual sizes differ");
  return G.rows() <= cfg.dense_threshold
             ? dense_direction(G, F, reg, cfg, cod_fallbacks)
             : sparse_direction(G, F, reg, cfg, cod_fallbacks);
}

NewtonReport semismooth_newton(
    const std::function<Vector(const Vector&)>& residual,
    const std::function<SpMat(const Vector&, const Vector&)>& jacobian,
    Vector& z, const NewtonConfig& cfg, const Vector& typical,
    const std::function<std::array<int, 3>(const Vector&)>& set_sizes) {
  NewtonReport rep;
  const int p = static_cast<int>(z.size());
  const Vector S = cfg.scale_variables ? newton_scaling(z, typical)
                                       : Vector::Ones(p);

  Vector F = residual(z);
  if (!F.allFinite())
    throw std::runtime_error("newton: non-finite residual at initial point");
  const double f0 = F.norm();
  rep.residual_history.push_back(f0);
  rep.residual_norm = f0;
  if (f0 <= cfg.eps) {
    rep.converged = true;
    return rep;
  }

  Vector d_prev = Vector::Zero(p);
  double step_norm = std::numeric_limits<double>::infinity();

  for (int k = 0; k < cfg.max_iterations; ++k) {
    SpMat G = jacobian(z, d_prev);
    if (cfg.scale_variables) {
      // Column scaling: solve in z = S * zhat.
      for (int c = 0; c < G.outerSize(); ++c)
        for (SpMat::InnerIterator it(G, c); it; ++it)
          it.valueRef() *= S[it.col()];
    }
    const double fnorm = F.norm();
    const double reg = cfg.alpha_bar * fnorm / f0;
    Vector h = gauss_newton_direction(G, F, reg, cfg, &rep.cod_fallbacks);
    ++rep.linear_solves;
    Vector d = S.cwiseProduct(h);

    NewtonReport::Iteration it;
    it.residual_norm = fnorm;
    if (set_sizes) it.set_sizes = set_sizes(z);

    const double theta0 = 0.5 * fnorm * fnorm;
    bool accepted = false;
    double t = 1.0;
    Vector z_new, F_new;

    if (h.norm() <= cfg.full_step_bound * fnorm) {
      z_new = z + d;
      F_new = residual(z_new);
      if (F_new.allFinite() && F_new.norm() < cfg.gamma * fnorm) {
        accepted = true;
        it.full_step = true;
      }
    }
    if (!accepted) {
      for (int mexp = 1; mexp <= cfg.max_ls_exponent; ++mexp) {
        t *= cfg.beta;
        z_new = z + t * d;
        F_new = residual(z_new);
        if (!F_new.allFinite()) continue;
        const double theta = 0.5 * F_new.squaredNorm();
        if (theta - theta0 <= -cfg.sigma * t * theta0) {
          accepted = true;
          it.ls_exponent = mexp;
          break;
        }
      }
    }

    ++rep.iterations;
    it.step_scale = accepted ? t : 0.0;
    rep.trace.push_back(it);

    if (!accepted) {
      rep.residual_norm = F.norm();
      rep.step_norm = step_norm;
      if (F.norm() <= cfg.eps) {
        // At residual levels inside the tolerance the merit surface is pure
        // roundoff and no trial step can show descent. Declining to move is a
        // zero step, which satisfies the step-size half of the stopping test,
        // and the residual half already holds.
        rep.step_norm = 0.0;
        rep.converged = true;
        return rep;
      }
      rep.failure_reason = "line search exhausted";
      return rep;
    }

    d_prev = t * d;
    z = z_new;
    F = F_new;
    if (!F.allFinite())
      throw std::runtime_error("newton: non-finite residual at accepted point");
    step_norm = t * h.norm();
    rep.residual_history.push_back(F.norm());
    if (F.norm() <= cfg.eps && step_norm <= cfg.eps) {
      rep.converged = true;
      break;
    }
  }

  rep.residual_norm = F.norm();
  rep.step_norm = step_norm;
  if (!rep.converged) {
    if (F.norm() <= cfg.eps)
      rep.converged = true;
    else
      rep.failure_reason = "max iterations exceeded";
  }
  return rep;
}

} // namespace bpdg
