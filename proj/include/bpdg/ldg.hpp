#ifndef BPDG_LDG_HPP
#define BPDG_LDG_HPP

#include <array>
#include <vector>

#include "bpdg/basis.hpp"
#include "bpdg/mesh.hpp"
#include "bpdg/problem.hpp"
#include "bpdg/quadrature.hpp"
#include "bpdg/types.hpp"

namespace bpdg {

// How the Lax-Friedrichs constant is treated when differentiating the
// numerical flux: FiniteDifference adds a one-sided FD derivative of the
// sampled constant (piecewise-exact Jacobian); Frozen treats it as locally
// constant.
enum class LfDerivative { FiniteDifference, Frozen };

// Discrete solution snapshot: scalar coefficients and, when requested, the
// eliminated gradient coefficients, ordered element-major (U: [K][mode],
// Q: [K][axis][mode]).
struct DgState {
  Vector U;
  Vector Q;
  double t = 0.0;
};

// Local discontinuous Galerkin operator for one ProblemSpec on one mesh.
// Conventions: the scalar first-order form residual L1 and the gradient
// reconstruction residual L2 are the weak forms
//   L1(u,Q;v) = -(F(u)-nu(u)Q, grad v) + (G(u),v)
//               + sum_faces (H(uL,uR;n) - nu_hat n.Q_hat, [v])
//   L2(u;w)   = (u, div w) - sum_faces (u_hat n, [w])
// with upwind-biased alternating fluxes u_hat/Q_hat and a local
// Lax-Friedrichs convective flux. The gradient unknowns are always
// eliminated through the (block-diagonal) mass matrix.
class DgOperator {
 public:
  DgOperator(Mesh mesh, Basis basis, ProblemSpec problem,
             double upwind_alpha = 1.0,
             LfDerivative lf_mode = LfDerivative::FiniteDifference);

  int n_u() const { return n_u_; }
  int n_q() const { return n_q_; }
  int n_modes() const { return nm_; }

  const Mesh& mesh() const { return mesh_; }
  const Basis& basis() const { return basis_; }
  const ProblemSpec& problem() const { return problem_; }
  const MassMatrix& mass() const { return mass_; }
  const QuadratureRule& volume_rule() const { return vol_rule_; }

  // Local Lax-Friedrichs flux H(uL,uR;n) and its stabilization constant
  // C = sup |d(n.F)/du| over [uL,uR], estimated by sampling 33 equispaced
  // interior points plus the endpoints.
  double lf_constant(double u_left, double u_right, const double* normal) const;
  double lax_friedrichs(double u_left, double u_right, const double* normal) const;

  Vector residual_L2(const Vector& U, double t) const;
  Vector eliminate_Q(const Vector& U, double t) const;
  Vector residual_L1(const Vector& U, const Vector& Q, double t) const;

  SpMat jac_L2_U() const;  // constant linear part of L2
  SpMat jac_L1_U(const Vector& U, const Vector& Q, double t) const;
  SpMat jac_L1_Q(const Vector& U, double t) const;

  // One diagonally implicit RK stage
  //   R(K) = M1 (K - U_n) + acc + dt a_ii L1(K, Q(K), t_n + c_i dt)
  // where acc carries the already-solved earlier stage contributions.
  struct StageContext {
    const Vector* U_n = nullptr;
    double t_n = 0.0;
    double dt = 0.0;
    double a_ii = 1.0;
    double c_i = 1.0;
    Vector accumulated;  // zero-size means no earlier stages
    double stage_time() const { return t_n + c_i * dt; }
  };

  Vector stage_residual(const Vector& K, const StageContext& ctx) const;
  SpMat stage_jacobian(const Vector& K, const StageContext& ctx) const;

  // Mean-coefficient rows of the stage Jacobian (the gradient of the
  // element conservation constraints), assembled directly.
  SpMat stage_eq_rows(const Vector& K, const StageContext& ctx) const;
  // Columnwise finite-difference estimate of sum_i mu_i Hess(h_i), with
  // columns grouped by element distance and entries restricted to the
  // face-neighbor stencil. Zero when mu vanishes or the residual is affine.
  SpMat stage_eq_curvature(const Vector& K, const StageContext& ctx,
                           const Vector& mu, double fd_scale = 1e-7) const;

  std::vector<int> mean_rows() const;

  // Pointwise helpers. ref_points are reference coordinates shared by all
  // elements; the result is n_elements x n_points.
  Matrix point_values(const Vector& U, const Matrix& ref_points) const;
  void map_to_physical(int element, const double* xi, double* x) const;

  // Element indices of each scalar coefficient (for grouping/scoping).
  int element_of(int coefficient) const { return coefficient / nm_; }

 private:
  struct FaceGeom {
    Matrix points_phys;     // nfq x 2 physical coordinates
    double face_jac = 1.0;  // measure/2 in 2D, 1 in 1D
    const Matrix* trace_left = nullptr;
    const Matrix* trace_right = nullptr;  // null on boundary faces
    bool q_from_interior = false;         // boundary Q data taken from trace
  };

  double viscosity(double u) const;
  double viscosity_deriv(double u) const;
  double source(double u, const double* x, double t) const;
  double source_deriv(double u, const double* x, double t) const;
  void flux(double u, double* f) const;
  void flux_deriv(double u, double* df) const;

  void lf_derivatives(double uL, double uR, const double* n, double C,
                      double* dC_duL, double* dC_duR) const;

  double boundary_u(const Mesh::Face& face, const FaceGeom& geom, int fq,
                    double u_trace, double t) const;

  int elem_axis_index(int element, int axis) const;
  int cyclic_elem_distance(int e1, int e2) const;
  std::vector<int> stencil_elements(int element) const;

  Mesh mesh_;
  Basis basis_;
  ProblemSpec problem_;
  double alpha_;
  LfDerivative lf_mode_;

  int nm_ = 0;
  int n_u_ = 0;
  int n_q_ = 0;

  QuadratureRule vol_rule_;
  Matrix phi_vol_;
  std::array<Matrix, 2> dphi_vol_;
  QuadratureRule face_rule_;            // 1D line rule along faces (2D only)
  std::array<std::array<Matrix, 2>, 2> trace_;  // [axis][side] tables
  std::vector<FaceGeom> face_geom_;
  MassMatrix mass_;
  SpMat Bq_;  // dQ/dU = -M2^{-1} dL2/dU, constant

  std::vector<std::vector<int>> curvature_groups_;  // per scalar column
};

} // namespace bpdg

#endif
