#include "bpdg/ldg.hpp"

#include <cmath>
#include <stdexcept>

namespace bpdg {

namespace {

constexpr int kLfSamples = 35;  // 33 interior points plus the endpoints
constexpr int kCurvatureSpacing = 9;

}  // namespace

DgOperator::DgOperator(Mesh mesh, Basis basis, ProblemSpec problem,
                       double upwind_alpha, LfDerivative lf_mode)
    : mesh_(std::move(mesh)),
      basis_(std::move(basis)),
      problem_(std::move(problem)),
      alpha_(upwind_alpha),
      lf_mode_(lf_mode) {
  if (mesh_.dim != basis_.dim() || mesh_.dim != problem_.dim)
    throw std::invalid_argument("ldg: mesh/basis/problem dimension mismatch");
  if (alpha_ < 0.0 || alpha_ > 1.0)
    throw std::invalid_argument("ldg: upwind alpha must be in [0,1]");

  nm_ = basis_.n_modes();
  n_u_ = mesh_.n_elements() * nm_;
  n_q_ = n_u_ * mesh_.dim;

  const int p = basis_.degree();
  if (mesh_.dim == 1) {
    vol_rule_ = quadrature_1d(QuadFamily::GaussLobatto, p + 2);
  } else {
    vol_rule_ = tensorize(quadrature_1d(QuadFamily::GaussLegendre, p + 1));
    face_rule_ = quadrature_1d(QuadFamily::GaussLegendre, p + 1);
  }
  phi_vol_ = basis_.values_at(vol_rule_.points);
  dphi_vol_ = basis_.grads_at(vol_rule_.points);
  mass_ = assemble_mass(mesh_, basis_, vol_rule_);

  // Trace tables per (normal axis, side).
  for (int axis = 0; axis < mesh_.dim; ++axis) {
    for (int side = 0; side < 2; ++side) {
      const double fixed = side == 0 ? -1.0 : 1.0;
      Matrix pts;
      if (mesh_.dim == 1) {
        pts.resize(1, 1);
        pts(0, 0) = fixed;
      } else {
        const int nfq = face_rule_.n();
        pts.resize(nfq, 2);
        for (int r = 0; r < nfq; ++r) {
          pts(r, axis) = fixed;
          pts(r, 1 - axis) = face_rule_.points(r, 0);
        }
      }
      trace_[axis][side] = basis_.values_at(pts);
    }
  }

  bool any_dirichlet = false;
  face_geom_.resize(mesh_.faces.size());
  for (std::size_t fi = 0; fi < mesh_.faces.size(); ++fi) {
    const auto& face = mesh_.faces[fi];
    FaceGeom geom;
    geom.trace_left = &trace_[face.axis][face.normal_sign > 0 ? 1 : 0];
    if (!face.boundary()) {
      geom.trace_right = &trace_[face.axis][0];
    } else {
      if (face.bc == BcTag::Dirichlet) any_dirichlet = true;
      geom.q_from_interior =
          face.bc == BcTag::Outflow ||
          (face.bc == BcTag::Dirichlet && !problem_.dirichlet_Q.has_value());
    }
    if (mesh_.dim == 1) {
      geom.points_phys.resize(1, 2);
      geom.points_phys(0, 0) = face.coord;
      geom.points_phys(0, 1) = 0.0;
      geom.face_jac = 1.0;
    } else {
      const int nfq = face_rule_.n();
      geom.points_phys.resize(nfq, 2);
      const double mid = 0.5 * (face.span_lo + face.span_hi);
      const double half = 0.5 * (face.span_hi - face.span_lo);
      for (int r = 0; r < nfq; ++r) {
        geom.points_phys(r, face.axis) = face.coord;
        geom.points_phys(r, 1 - face.axis) = mid + half * face_rule_.points(r, 0);
      }
      geom.face_jac = half;
    }
    face_geom_[fi] = geom;
  }
  if (any_dirichlet && !problem_.dirichlet_u)
    throw std::invalid_argument("ldg: Dirichlet faces need boundary data");

  // Constant gradient-elimination operator dQ/dU = -M2^{-1} dL2/dU.
  SpMat B = jac_L2_U();
  Bq_ = -B;
  for (int k = 0; k < Bq_.outerSize(); ++k)
    for (SpMat::InnerIterator it(Bq_, k); it; ++it) {
      const int K = it.row() / (mesh_.dim * nm_);
      const int j = it.row() % nm_;
      it.valueRef() /= mass_.diag[K * nm_ + j];
    }

  // Greedy element groups for curvature probing: members pairwise at least
  // kCurvatureSpacing apart in cyclic Chebyshev distance, so perturbation
  // responses attributed within the distance-2 stencil cannot mix.
  const int ne = mesh_.n_elements();
  for (int e = 0; e < ne; ++e) {
    bool placed = false;
    for (auto& group : curvature_groups_) {
      bool ok = true;
      for (int m : group)
        if (cyclic_elem_distance(e, m) < kCurvatureSpacing) {
          ok = false;
          break;
        }
      if (ok) {
        group.push_back(e);
        placed = true;
        break;
      }
    }
    if (!placed) curvature_groups_.push_back({e});
  }
}

int DgOperator::elem_axis_index(int element, int axis) const {
  return axis == 0 ? element % mesh_.counts[0] : element / mesh_.counts[0];
}

std::vector<int> DgOperator::stencil_elements(int element) const {
  std::vector<int> out;
  const int nx = mesh_.counts[0];
  const int ny = mesh_.dim == 2 ? mesh_.counts[1] : 1;
  const int ix = elem_axis_index(element, 0);
  const int iy = mesh_.dim == 2 ? elem_axis_index(element, 1) : 0;
  const bool px = problem_.bc[0] == BcTag::Periodic;
  const bool py = mesh_.dim == 2 && problem_.bc[2] == BcTag::Periodic;
  for (int dy = -2; dy <= 2; ++dy) {
    if (mesh_.dim == 1 && dy != 0) continue;
    int jy = iy + dy;
    if (py) jy = (jy % ny + ny) % ny;
    else if (jy < 0 || jy >= ny) continue;
    for (int dx = -2; dx <= 2; ++dx) {
      int jx = ix + dx;
      if (px) jx = (jx % nx + nx) % nx;
      else if (jx < 0 || jx >= nx) continue;
      const int e = jy * nx + jx;
      bool seen = false;
      for (int v : out) seen = seen || v == e;
      if (!seen) out.push_back(e);
    }
  }
  return out;
}

int DgOperator::cyclic_elem_distance(int e1, int e2) const {
  int dist = 0;
  for (int a = 0; a < mesh_.dim; ++a) {
    int d = std::abs(elem_axis_index(e1, a) - elem_axis_index(e2, a));
    if (problem_.bc[2 * a] == BcTag::Periodic)
      d = std::min(d, mesh_.counts[a] - d);
    dist = std::max(dist, d);
  }
  return dist;
}

double DgOperator::viscosity(double u) const {
  return problem_.has_viscosity ? problem_.viscosity(u) : 0.0;
}

double DgOperator::viscosity_deriv(double u) const {
  return problem_.has_viscosity ? problem_.viscosity_deriv(u) : 0.0;
}

double DgOperator::source(double u, const double* x, double t) const {
  return problem_.has_source ? problem_.source(u, x, t) : 0.0;
}

double DgOperator::source_deriv(double u, const double* x, double t) const {
  return problem_.has_source ? problem_.source_deriv(u, x, t) : 0.0;
}

void DgOperator::flux(double u, double* f) const {
  f[0] = 0.0;
  f[1] = 0.0;
  if (problem_.has_flux) problem_.flux(u, f);
}

void DgOperator::flux_deriv(double u, double* df) const {
  df[0] = 0.0;
  df[1] = 0.0;
  if (problem_.has_flux) problem_.flux_deriv(u, df);
}

double DgOperator::lf_constant(double u_left, double u_right,
                               const double* normal) const {
  if (!problem_.has_flux) return 0.0;
  const double lo = std::min(u_left, u_right);
  const double hi = std::max(u_left, u_right);
  double c = 0.0;
  double df[2];
  for (int k = 0; k < kLfSamples; ++k) {
    const double u = lo + (hi - lo) * k / (kLfSamples - 1.0);
    flux_deriv(u, df);
    double s = normal[0] * df[0];
    if (mesh_.dim == 2) s += normal[1] * df[1];
    c = std::max(c, std::abs(s));
  }
  return c;
}

double DgOperator::lax_friedrichs(double u_left, double u_right,
                                  const double* normal) const {
  double fl[2], fr[2];
  flux(u_left, fl);
  flux(u_right, fr);
  double nf = normal[0] * (fl[0] + fr[0]);
  if (mesh_.dim == 2) nf += normal[1] * (fl[1] + fr[1]);
  const double c = lf_constant(u_left, u_right, normal);
  return 0.5 * (nf - c * (u_right - u_left));
}

void DgOperator::lf_derivatives(double uL, double uR, const double* n, double C,
                                double* dC_duL, double* dC_duR) const {
  *dC_duL = 0.0;
  *dC_duR = 0.0;
  if (lf_mode_ == LfDerivative::Frozen || !problem_.has_flux) return;
  const double sL = 1e-7 * (1.0 + std::abs(uL));
  const double sR = 1e-7 * (1.0 + std::abs(uR));
  *dC_duL = (lf_constant(uL + sL, uR, n) - C) / sL;
  *dC_duR = (lf_constant(uL, uR + sR, n) - C) / sR;
}

double DgOperator::boundary_u(const Mesh::Face& face, const FaceGeom& geom,
                              int fq, double u_trace, double t) const {
  if (face.bc == BcTag::Outflow) return u_trace;
  double x[2] = {geom.points_phys(fq, 0), geom.points_phys(fq, 1)};
  return problem_.dirichlet_u(x, t);
}

Vector DgOperator::residual_L2(const Vector& U, double t) const {
  Vector r = Vector::Zero(n_q_);
  const int dim = mesh_.dim;
  const double two_pow = dim == 1 ? 2.0 : 4.0;

  for (int K = 0; K < mesh_.n_elements(); ++K) {
    const auto& el = mesh_.elements[K];
    const double jac = el.measure(dim) / two_pow;
    const Vector uq = phi_vol_ * U.segment(K * nm_, nm_);
    for (int c = 0; c < dim; ++c) {
      const double gs = 2.0 / el.width(c);
      const Vector wq = vol_rule_.weights.cwiseProduct(uq) * (gs * jac);
      r.segment((K * dim + c) * nm_, nm_) += dphi_vol_[c].transpose() * wq;
    }
  }

  for (std::size_t fi = 0; fi < mesh_.faces.size(); ++fi) {
    const auto& face = mesh_.faces[fi];
    const auto& geom = face_geom_[fi];
    const Matrix& TL = *geom.trace_left;
    const int nfq = static_cast<int>(TL.rows());
    const int a = face.axis;
    const double ns = face.normal_sign;
    for (int fq = 0; fq < nfq; ++fq) {
      const double w = (dim == 2 ? face_rule_.weights[fq] : 1.0) * geom.face_jac;
      const double uL = TL.row(fq).dot(U.segment(face.left * nm_, nm_));
      double uhat;
      if (!face.boundary()) {
        const double uR =
            geom.trace_right->row(fq).dot(U.segment(face.right * nm_, nm_));
        uhat = alpha_ * uL + (1.0 - alpha_) * uR;
      } else {
        uhat = boundary_u(face, geom, fq, uL, t);
      }
      const double val = w * uhat * ns;
      r.segment((face.left * dim + a) * nm_, nm_) -= val * TL.row(fq).transpose();
      if (!face.boundary())
        r.segment((face.right * dim + a) * nm_, nm_) +=
            val * geom.trace_right->row(fq).transpose();
    }
  }
  return r;
}

Vector DgOperator::eliminate_Q(const Vector& U, double t) const {
  Vector q = residual_L2(U, t);
  const int dim = mesh_.dim;
  for (int K = 0; K < mesh_.n_elements(); ++K)
    for (int c = 0; c < dim; ++c)
      for (int j = 0; j < nm_; ++j)
        q[(K * dim + c) * nm_ + j] /= -mass_.diag[K * nm_ + j];
  return q;
}

Vector DgOperator::residual_L1(const Vector& U, const Vector& Q, double t) const {
  Vector r = Vector::Zero(n_u_);
  const int dim = mesh_.dim;
  const double two_pow = dim == 1 ? 2.0 : 4.0;
  double f[2];

  for (int K = 0; K < mesh_.n_elements(); ++K) {
    const auto& el = mesh_.elements[K];
    const double jac = el.measure(dim) / two_pow;
    const Vector uq = phi_vol_ * U.segment(K * nm_, nm_);
    Vector qq[2];
    for (int c = 0; c < dim; ++c)
      qq[c] = phi_vol_ * Q.segment((K * dim + c) * nm_, nm_);
    for (int q = 0; q < vol_rule_.n(); ++q) {
      const double w = vol_rule_.weights[q];
      const double u = uq[q];
      flux(u, f);
      const double nu = viscosity(u);
      for (int c = 0; c < dim; ++c) {
        const double val = (f[c] - nu * qq[c][q]) * (2.0 / el.width(c)) * jac * w;
        r.segment(K * nm_, nm_) -= val * dphi_vol_[c].row(q).transpose();
      }
      if (problem_.has_source) {
        double x[2];
        double xi[2] = {vol_rule_.points(q, 0),
                        dim == 2 ? vol_rule_.points(q, 1) : 0.0};
        map_to_physical(K, xi, x);
        r.segment(K * nm_, nm_) +=
            (w * jac * source(u, x, t)) * phi_vol_.row(q).transpose();
      }
    }
  }

  for (std::size_t fi = 0; fi < mesh_.faces.size(); ++fi) {
    const auto& face = mesh_.faces[fi];
    const auto& geom = face_geom_[fi];
    const Matrix& TL = *geom.trace_left;
    const int nfq = static_cast<int>(TL.rows());
    const int a = face.axis;
    double n[2] = {0.0, 0.0};
    n[a] = face.normal_sign;
    for (int fq = 0; fq < nfq; ++fq) {
      const double w = (dim == 2 ? face_rule_.weights[fq] : 1.0) * geom.face_jac;
      const double uL = TL.row(fq).dot(U.segment(face.left * nm_, nm_));
      const double qL = TL.row(fq).dot(Q.segment((face.left * dim + a) * nm_, nm_));
      double u_other, qhat;
      if (!face.boundary()) {
        u_other = geom.trace_right->row(fq).dot(U.segment(face.right * nm_, nm_));
        const double qR = geom.trace_right->row(fq).dot(
            Q.segment((face.right * dim + a) * nm_, nm_));
        qhat = (1.0 - alpha_) * qL + alpha_ * qR;
      } else {
        u_other = boundary_u(face, geom, fq, uL, t);
        if (geom.q_from_interior) {
          qhat = qL;
        } else {
          double x[2] = {geom.points_phys(fq, 0), geom.points_phys(fq, 1)};
          double qb[2] = {0.0, 0.0};
          (*problem_.dirichlet_Q)(x, t, qb);
          qhat = qb[a];
        }
      }
      const double H = lax_friedrichs(uL, u_other, n);
      const double nu_hat = 0.5 * (viscosity(uL) + viscosity(u_other));
      const double val = w * (H - nu_hat * face.normal_sign * qhat);
      r.segment(face.left * nm_, nm_) += val * TL.row(fq).transpose();
      if (!face.boundary())
        r.segment(face.right * nm_, nm_) -=
            val * geom.trace_right->row(fq).transpose();
    }
  }
  return r;
}

SpMat DgOperator::jac_L2_U() const {
  std::vector<Triplet> trip;
  const int dim = mesh_.dim;
  const double two_pow = dim == 1 ? 2.0 : 4.0;

  for (int K = 0; K < mesh_.n_elements(); ++K) {
    const auto& el = mesh_.elements[K];
    const double jac = el.measure(dim) / two_pow;
    for (int c = 0; c < dim; ++c) {
      const double gs = 2.0 / el.width(c);
      for (int q = 0; q < vol_rule_.n(); ++q)
        for (int i = 0; i < nm_; ++i)
          for (int j = 0; j < nm_; ++j)
            trip.emplace_back((K * dim + c) * nm_ + i, K * nm_ + j,
                              vol_rule_.weights[q] * dphi_vol_[c](q, i) *
                                  phi_vol_(q, j) * gs * jac);
    }
  }

  for (std::size_t fi = 0; fi < mesh_.faces.size(); ++fi) {
    const auto& face = mesh_.faces[fi];
    const auto& geom = face_geom_[fi];
    const Matrix& TL = *geom.trace_left;
    const int nfq = static_cast<int>(TL.rows());
    const int a = face.axis;
    const double ns = face.normal_sign;
    for (int r = 0; r < nfq; ++r) {
      const double w = (mesh_.dim == 2 ? face_rule_.weights[r] : 1.0) * geom.face_jac;
      if (!face.boundary()) {
        const Matrix& TR = *geom.trace_right;
        for (int i = 0; i < nm_; ++i)
          for (int j = 0; j < nm_; ++j) {
            // u_hat = alpha uL + (1-alpha) uR
            trip.emplace_back((face.left * dim + a) * nm_ + i, face.left * nm_ + j,
                              -w * ns * alpha_ * TL(r, i) * TL(r, j));
            trip.emplace_back((face.left * dim + a) * nm_ + i, face.right * nm_ + j,
                              -w * ns * (1.0 - alpha_) * TL(r, i) * TR(r, j));
            trip.emplace_back((face.right * dim + a) * nm_ + i, face.left * nm_ + j,
                              w * ns * alpha_ * TR(r, i) * TL(r, j));
            trip.emplace_back((face.right * dim + a) * nm_ + i, face.right * nm_ + j,
                              w * ns * (1.0 - alpha_) * TR(r, i) * TR(r, j));
          }
      } else if (face.bc == BcTag::Outflow) {
        for (int i = 0; i < nm_; ++i)
          for (int j = 0; j < nm_; ++j)
            trip.emplace_back((face.left * dim + a) * nm_ + i, face.left * nm_ + j,
                              -w * ns * TL(r, i) * TL(r, j));
      }
    }
  }

  SpMat B(n_q_, n_u_);
  B.setFromTriplets(trip.begin(), trip.end());
  return B;
}

SpMat DgOperator::jac_L1_U(const Vector& U, const Vector& Q, double t) const {
  std::vector<Triplet> trip;
  const int dim = mesh_.dim;
  const double two_pow = dim == 1 ? 2.0 : 4.0;
  double df[2];

  for (int K = 0; K < mesh_.n_elements(); ++K) {
    const auto& el = mesh_.elements[K];
    const double jac = el.measure(dim) / two_pow;
    const Vector uq = phi_vol_ * U.segment(K * nm_, nm_);
    Vector qq[2];
    for (int c = 0; c < dim; ++c)
      qq[c] = phi_vol_ * Q.segment((K * dim + c) * nm_, nm_);
    for (int q = 0; q < vol_rule_.n(); ++q) {
      const double w = vol_rule_.weights[q];
      const double u = uq[q];
      flux_deriv(u, df);
      const double dnu = viscosity_deriv(u);
      for (int i = 0; i < nm_; ++i) {
        double row = 0.0;
        for (int c = 0; c < dim; ++c)
          row += (df[c] - dnu * qq[c][q]) * dphi_vol_[c](q, i) * (2.0 / el.width(c));
        if (problem_.has_source) {
          double x[2];
          double xi[2] = {vol_rule_.points(q, 0),
                          dim == 2 ? vol_rule_.points(q, 1) : 0.0};
          map_to_physical(K, xi, x);
          row -= source_deriv(u, x, t) * phi_vol_(q, i);
        }
        for (int j = 0; j < nm_; ++j)
          trip.emplace_back(K * nm_ + i, K * nm_ + j, -w * jac * row * phi_vol_(q, j));
      }
    }
  }

  for (std::size_t fi = 0; fi < mesh_.faces.size(); ++fi) {
    const auto& face = mesh_.faces[fi];
    const auto& geom = face_geom_[fi];
    const Matrix& TL = *geom.trace_left;
    const int nfq = static_cast<int>(TL.rows());
    const int a = face.axis;
    const double ns = face.normal_sign;
    double n[2] = {0.0, 0.0};
    n[a] = ns;
    for (int r = 0; r < nfq; ++r) {
      const double w = (dim == 2 ? face_rule_.weights[r] : 1.0) * geom.face_jac;
      const double uL = TL.row(r).dot(U.segment(face.left * nm_, nm_));
      const double qL = TL.row(r).dot(Q.segment((face.left * dim + a) * nm_, nm_));
      double dfl[2], dfr[2];
      if (!face.boundary()) {
        const Matrix& TR = *geom.trace_right;
        const double uR = TR.row(r).dot(U.segment(face.right * nm_, nm_));
        const double qR = TR.row(r).dot(Q.segment((face.right * dim + a) * nm_, nm_));
        const double qhat = (1.0 - alpha_) * qL + alpha_ * qR;
        const double C = lf_constant(uL, uR, n);
        double dC_duL, dC_duR;
        lf_derivatives(uL, uR, n, C, &dC_duL, &dC_duR);
        flux_deriv(uL, dfl);
        flux_deriv(uR, dfr);
        const double dH_duL =
            0.5 * (ns * dfl[a] - dC_duL * (uR - uL) + C);
        const double dH_duR =
            0.5 * (ns * dfr[a] - dC_duR * (uR - uL) - C);
        const double dval_duL = dH_duL - 0.5 * viscosity_deriv(uL) * ns * qhat;
        const double dval_duR = dH_duR - 0.5 * viscosity_deriv(uR) * ns * qhat;
        for (int i = 0; i < nm_; ++i)
          for (int j = 0; j < nm_; ++j) {
            trip.emplace_back(face.left * nm_ + i, face.left * nm_ + j,
                              w * dval_duL * TL(r, i) * TL(r, j));
            trip.emplace_back(face.left * nm_ + i, face.right * nm_ + j,
                              w * dval_duR * TL(r, i) * TR(r, j));
            trip.emplace_back(face.right * nm_ + i, face.left * nm_ + j,
                              -w * dval_duL * TR(r, i) * TL(r, j));
            trip.emplace_back(face.right * nm_ + i, face.right * nm_ + j,
                              -w * dval_duR * TR(r, i) * TR(r, j));
          }
      } else {
        const double ub = boundary_u(face, geom, r, uL, t);
        double qhat;
        if (geom.q_from_interior) {
          qhat = qL;
        } else {
          double x[2] = {geom.points_phys(r, 0), geom.points_phys(r, 1)};
          double qb[2] = {0.0, 0.0};
          (*problem_.dirichlet_Q)(x, t, qb);
          qhat = qb[a];
        }
        const double C = lf_constant(uL, ub, n);
        double dC_duL, dC_duR;
        lf_derivatives(uL, ub, n, C, &dC_duL, &dC_duR);
        flux_deriv(uL, dfl);
        flux_deriv(ub, dfr);
        double dH_duL = 0.5 * (ns * dfl[a] - dC_duL * (ub - uL) + C);
        double dval = dH_duL - 0.5 * viscosity_deriv(uL) * ns * qhat;
        if (face.bc == BcTag::Outflow) {
          // ub tracks the trace, so the uR sensitivities fold into uL.
          const double dH_duR = 0.5 * (ns * dfr[a] - dC_duR * (ub - uL) - C);
          dval += dH_duR - 0.5 * viscosity_deriv(ub) * ns * qhat;
        }
        for (int i = 0; i < nm_; ++i)
          for (int j = 0; j < nm_; ++j)
            trip.emplace_back(face.left * nm_ + i, face.left * nm_ + j,
                              w * dval * TL(r, i) * TL(r, j));
      }
    }
  }

  SpMat J(n_u_, n_u_);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

SpMat DgOperator::jac_L1_Q(const Vector& U, double t) const {
  std::vector<Triplet> trip;
  const int dim = mesh_.dim;
  const double two_pow = dim == 1 ? 2.0 : 4.0;

  if (problem_.has_viscosity) {
    for (int K = 0; K < mesh_.n_elements(); ++K) {
      const auto& el = mesh_.elements[K];
      const double jac = el.measure(dim) / two_pow;
      const Vector uq = phi_vol_ * U.segment(K * nm_, nm_);
      for (int q = 0; q < vol_rule_.n(); ++q) {
        const double w = vol_rule_.weights[q];
        const double nu = viscosity(uq[q]);
        for (int c = 0; c < dim; ++c) {
          const double gs = 2.0 / el.width(c);
          for (int i = 0; i < nm_; ++i)
            for (int j = 0; j < nm_; ++j)
              trip.emplace_back(K * nm_ + i, (K * dim + c) * nm_ + j,
                                w * jac * nu * dphi_vol_[c](q, i) * gs * phi_vol_(q, j));
        }
      }
    }

    for (std::size_t fi = 0; fi < mesh_.faces.size(); ++fi) {
      const auto& face = mesh_.faces[fi];
      const auto& geom = face_geom_[fi];
      const Matrix& TL = *geom.trace_left;
      const int nfq = static_cast<int>(TL.rows());
      const int a = face.axis;
      const double ns = face.normal_sign;
      for (int r = 0; r < nfq; ++r) {
        const double w = (dim == 2 ? face_rule_.weights[r] : 1.0) * geom.face_jac;
        const double uL = TL.row(r).dot(U.segment(face.left * nm_, nm_));
        if (!face.boundary()) {
          const Matrix& TR = *geom.trace_right;
          const double uR = TR.row(r).dot(U.segment(face.right * nm_, nm_));
          const double nu_hat = 0.5 * (viscosity(uL) + viscosity(uR));
          for (int i = 0; i < nm_; ++i)
            for (int j = 0; j < nm_; ++j) {
              trip.emplace_back(face.left * nm_ + i, (face.left * dim + a) * nm_ + j,
                                -w * nu_hat * ns * (1.0 - alpha_) * TL(r, i) * TL(r, j));
              trip.emplace_back(face.left * nm_ + i, (face.right * dim + a) * nm_ + j,
                                -w * nu_hat * ns * alpha_ * TL(r, i) * TR(r, j));
              trip.emplace_back(face.right * nm_ + i, (face.left * dim + a) * nm_ + j,
                                w * nu_hat * ns * (1.0 - alpha_) * TR(r, i) * TL(r, j));
              trip.emplace_back(face.right * nm_ + i, (face.right * dim + a) * nm_ + j,
                                w * nu_hat * ns * alpha_ * TR(r, i) * TR(r, j));
            }
        } else if (geom.q_from_interior) {
          const double ub = boundary_u(face, geom, r, uL, t);
          const double nu_hat = 0.5 * (viscosity(uL) + viscosity(ub));
          for (int i = 0; i < nm_; ++i)
            for (int j = 0; j < nm_; ++j)
              trip.emplace_back(face.left * nm_ + i, (face.left * dim + a) * nm_ + j,
                                -w * nu_hat * ns * TL(r, i) * TL(r, j));
        }
      }
    }
  }

  SpMat J(n_u_, n_q_);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

Vector DgOperator::stage_residual(const Vector& K, const StageContext& ctx) const {
  const double t = ctx.stage_time();
  Vector r = ctx.dt * ctx.a_ii * residual_L1(K, eliminate_Q(K, t), t);
  r += mass_.diag.cwiseProduct(K - *ctx.U_n);
  if (ctx.accumulated.size() > 0) r += ctx.accumulated;
  return r;
}

SpMat DgOperator::stage_jacobian(const Vector& K, const StageContext& ctx) const {
  const double t = ctx.stage_time();
  const Vector Q = eliminate_Q(K, t);
  SpMat J = jac_L1_U(K, Q, t);
  if (problem_.has_viscosity) J += SpMat(jac_L1_Q(K, t) * Bq_);
  J *= ctx.dt * ctx.a_ii;
  SpMat M(n_u_, n_u_);
  std::vector<Triplet> trip;
  trip.reserve(n_u_);
  for (int i = 0; i < n_u_; ++i) trip.emplace_back(i, i, mass_.diag[i]);
  M.setFromTriplets(trip.begin(), trip.end());
  return SpMat(M + J);
}

SpMat DgOperator::stage_eq_rows(const Vector& K, const StageContext& ctx) const {
  const int dim = mesh_.dim;
  const double two_pow = dim == 1 ? 2.0 : 4.0;
  const int ne = mesh_.n_elements();
  const double t = ctx.stage_time();
  const Vector Q = eliminate_Q(K, t);

  std::vector<Triplet> trip_u;  // mean rows of dL1/dU
  std::vector<Triplet> trip_q;  // mean rows of dL1/dQ

  if (problem_.has_source) {
    for (int e = 0; e < ne; ++e) {
      const auto& el = mesh_.elements[e];
      const double jac = el.measure(dim) / two_pow;
      const Vector uq = phi_vol_ * K.segment(e * nm_, nm_);
      for (int q = 0; q < vol_rule_.n(); ++q) {
        double x[2];
        double xi[2] = {vol_rule_.points(q, 0),
                        dim == 2 ? vol_rule_.points(q, 1) : 0.0};
        map_to_physical(e, xi, x);
        const double gu = source_deriv(uq[q], x, t);
        if (gu == 0.0) continue;
        for (int j = 0; j < nm_; ++j)
          trip_u.emplace_back(e, e * nm_ + j,
                              vol_rule_.weights[q] * jac * gu * phi_vol_(q, j));
      }
    }
  }

  for (std::size_t fi = 0; fi < mesh_.faces.size(); ++fi) {
    const auto& face = mesh_.faces[fi];
    const auto& geom = face_geom_[fi];
    const Matrix& TL = *geom.trace_left;
    const int nfq = static_cast<int>(TL.rows());
    const int a = face.axis;
    const double ns = face.normal_sign;
    double n[2] = {0.0, 0.0};
    n[a] = ns;
    for (int r = 0; r < nfq; ++r) {
      const double w = (dim == 2 ? face_rule_.weights[r] : 1.0) * geom.face_jac;
      const double uL = TL.row(r).dot(K.segment(face.left * nm_, nm_));
      const double qL = TL.row(r).dot(Q.segment((face.left * dim + a) * nm_, nm_));
      double dfl[2], dfr[2];
      if (!face.boundary()) {
        const Matrix& TR = *geom.trace_right;
        const double uR = TR.row(r).dot(K.segment(face.right * nm_, nm_));
        const double qR = TR.row(r).dot(Q.segment((face.right * dim + a) * nm_, nm_));
        const double qhat = (1.0 - alpha_) * qL + alpha_ * qR;
        const double C = lf_constant(uL, uR, n);
        double dC_duL, dC_duR;
        lf_derivatives(uL, uR, n, C, &dC_duL, &dC_duR);
        flux_deriv(uL, dfl);
        flux_deriv(uR, dfr);
        const double dval_duL = 0.5 * (ns * dfl[a] - dC_duL * (uR - uL) + C) -
                                0.5 * viscosity_deriv(uL) * ns * qhat;
        const double dval_duR = 0.5 * (ns * dfr[a] - dC_duR * (uR - uL) - C) -
                                0.5 * viscosity_deriv(uR) * ns * qhat;
        const double nu_hat = 0.5 * (viscosity(uL) + viscosity(uR));
        for (int j = 0; j < nm_; ++j) {
          trip_u.emplace_back(face.left, face.left * nm_ + j, w * dval_duL * TL(r, j));
          trip_u.emplace_back(face.left, face.right * nm_ + j, w * dval_duR * TR(r, j));
          trip_u.emplace_back(face.right, face.left * nm_ + j, -w * dval_duL * TL(r, j));
          trip_u.emplace_back(face.right, face.right * nm_ + j, -w * dval_duR * TR(r, j));
          if (problem_.has_viscosity) {
            trip_q.emplace_back(face.left, (face.left * dim + a) * nm_ + j,
                                -w * nu_hat * ns * (1.0 - alpha_) * TL(r, j));
            trip_q.emplace_back(face.left, (face.right * dim + a) * nm_ + j,
                                -w * nu_hat * ns * alpha_ * TR(r, j));
            trip_q.emplace_back(face.right, (face.left * dim + a) * nm_ + j,
                                w * nu_hat * ns * (1.0 - alpha_) * TL(r, j));
            trip_q.emplace_back(face.right, (face.right * dim + a) * nm_ + j,
                                w * nu_hat * ns * alpha_ * TR(r, j));
          }
        }
      } else {
        const double ub = boundary_u(face, geom, r, uL, t);
        double qhat;
        if (geom.q_from_interior) {
          qhat = qL;
        } else {
          double x[2] = {geom.points_phys(r, 0), geom.points_phys(r, 1)};
          double qb[2] = {0.0, 0.0};
          (*problem_.dirichlet_Q)(x, t, qb);
          qhat = qb[a];
        }
        const double C = lf_constant(uL, ub, n);
        double dC_duL, dC_duR;
        lf_derivatives(uL, ub, n, C, &dC_duL, &dC_duR);
        flux_deriv(uL, dfl);
        flux_deriv(ub, dfr);
        double dval = 0.5 * (ns * dfl[a] - dC_duL * (ub - uL) + C) -
                      0.5 * viscosity_deriv(uL) * ns * qhat;
        if (face.bc == BcTag::Outflow)
          dval += 0.5 * (ns * dfr[a] - dC_duR * (ub - uL) - C) -
                  0.5 * viscosity_deriv(ub) * ns * qhat;
        const double nu_hat = 0.5 * (viscosity(uL) + viscosity(ub));
        for (int j = 0; j < nm_; ++j) {
          trip_u.emplace_back(face.left, face.left * nm_ + j, w * dval * TL(r, j));
          if (problem_.has_viscosity && geom.q_from_interior)
            trip_q.emplace_back(face.left, (face.left * dim + a) * nm_ + j,
                                -w * nu_hat * ns * TL(r, j));
        }
      }
    }
  }

  SpMat mean_u(ne, n_u_), mean_q(ne, n_q_);
  mean_u.setFromTriplets(trip_u.begin(), trip_u.end());
  mean_q.setFromTriplets(trip_q.begin(), trip_q.end());

  SpMat rows = mean_u;
  if (problem_.has_viscosity) rows += SpMat(mean_q * Bq_);
  rows *= ctx.dt * ctx.a_ii;

  std::vector<Triplet> trip_m;
  trip_m.reserve(ne);
  for (int e = 0; e < ne; ++e)
    trip_m.emplace_back(e, e * nm_, mass_.diag[e * nm_]);
  SpMat M(ne, n_u_);
  M.setFromTriplets(trip_m.begin(), trip_m.end());
  return SpMat(rows + M);
}

SpMat DgOperator::stage_eq_curvature(const Vector& K, const StageContext& ctx,
                                     const Vector& mu, double fd_scale) const {
  SpMat C(n_u_, n_u_);
  if (problem_.residual_affine || mu.size() == 0 ||
      mu.lpNorm<Eigen::Infinity>() == 0.0)
    return C;

  const Vector v0 = stage_eq_rows(K, ctx).transpose() * mu;
  std::vector<Triplet> trip;
  Vector X = K;

  for (const auto& group : curvature_groups_) {
    for (int mode = 0; mode < nm_; ++mode) {
      std::vector<std::pair<int, double>> cols;  // (column, step)
      for (int e : group) {
        const int c = e * nm_ + mode;
        const double s = fd_scale * (1.0 + std::abs(K[c]));
        X[c] += s;
        cols.emplace_back(c, s);
      }
      const Vector diff = stage_eq_rows(X, ctx).transpose() * mu - v0;
      for (const auto& [c, s] : cols) {
        X[c] = K[c];
        for (int re : stencil_elements(c / nm_))
          for (int j = 0; j < nm_; ++j) {
            const double val = diff[re * nm_ + j] / s;
            if (val != 0.0) trip.emplace_back(re * nm_ + j, c, val);
          }
      }
    }
  }
  C.setFromTriplets(trip.begin(), trip.end());
  return C;
}

std::vector<int> DgOperator::mean_rows() const {
  std::vector<int> rows(mesh_.n_elements());
  for (int e = 0; e < mesh_.n_elements(); ++e) rows[e] = e * nm_;
  return rows;
}

Matrix DgOperator::point_values(const Vector& U, const Matrix& ref_points) const {
  const Matrix vals = basis_.values_at(ref_points);
  Matrix out(mesh_.n_elements(), ref_points.rows());
  for (int e = 0; e < mesh_.n_elements(); ++e)
    out.row(e) = (vals * U.segment(e * nm_, nm_)).transpose();
  return out;
}

void DgOperator::map_to_physical(int element, const double* xi, double* x) const {
  const auto& el = mesh_.elements[element];
  x[0] = el.lo[0] + 0.5 * (xi[0] + 1.0) * el.width(0);
  x[1] = mesh_.dim == 2 ? el.lo[1] + 0.5 * (xi[1] + 1.0) * el.width(1) : 0.0;
}

} // namespace bpdg
