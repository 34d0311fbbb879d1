#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bpdg/kkt.hpp"
#include "bpdg/ldg.hpp"
#include "bpdg/newton.hpp"
#include "bpdg/types.hpp"

namespace bpdg {

// Diagonally implicit Runge-Kutta tableau; all catalog entries are stiffly
// accurate (b equals the last row of a), so the final stage is the update.
struct DirkTableau {
  int order = 0;
  int stages = 0;
  Matrix a;
  Vector b;
  Vector c;
};

DirkTableau dirk_tableau(int order);

// Bound rows at the volume quadrature points of every element: lower rows
// read u_min - u_h(x) <= 0, upper rows u_h(x) - u_max <= 0.
ConstraintSet build_bound_constraints(const DgOperator& dg);

struct StepRecord {
  double t = 0.0;
  double dt = 0.0;
  double cfl = 0.0;    // max |F'(u)| dt / h at the start of the step
  int newton_iterations = 0;
  double min_u = 0.0;  // over constraint points
  double max_u = 0.0;
  int active_multipliers = 0;
  // Largest per-element mean residual of the final stage; with stiffly
  // accurate tableaus this is the conservation defect of the whole step.
  double conservation = 0.0;
};

struct DirkOptions {
  int order = 2;
  double t_start = 0.0;
  double t_end = 1.0;
  bool limiter = true;
  bool conserve = true;
  bool mu_curvature = true;  // second-order term of the equality rows
  // Restrict bound rows to elements whose values sit within
  // scope_margin * (u_max - u_min) of a bound; violations of the dropped
  // rows force a re-solve with the full set.
  bool scope_near = false;
  double scope_margin = 0.1;
  double cfl = 0.0;       // caps the CFL multiplier; 0 takes the problem value
  double fixed_dt = 0.0;  // bypasses the controller when positive
  double dt_min = 1e-10;  // abort when rejections push the scale below this
  int max_steps = 200000;
  double growth = 1.2;
  int band_low = 5;    // grow only when a step needed fewer iterations
  int band_high = 20;  // shrink when a step needed more
  NewtonConfig newton;
  // Called after each accepted step with the last stage's multipliers.
  std::function<void(const StepRecord&, const Vector& lambda,
                     const ConstraintSet&)> on_step;
};

struct DirkResult {
  bool ok = false;
  std::string message;
  double t_final = 0.0;
  int steps = 0;
  int rejected = 0;
  int total_newton_iterations = 0;
  std::vector<StepRecord> records;
  Vector last_multipliers;         // lambda from the final stage solve
  ConstraintSet last_constraints;  // rows the final multipliers refer to
  // Max-norm rate of change of the coefficients over the last accepted step,
  // |U_{n+1} - U_n|_inf / dt. At a constrained steady state the spatial
  // residual equals the multiplier force and stays O(lambda), so steadiness
  // is detected from the iteration becoming stationary instead.
  double steady_residual = 0.0;
};

// Advances U in place from t_start to t_end (or until the rate of change
// per step drops below the problem's steady target).
DirkResult integrate(const DgOperator& dg, Vector& U, const DirkOptions& opt);

// L2 projection of f onto the broken space. With the limiter on, bound rows
// are enforced through the stationarity system (no equality rows) starting
// from the unconstrained projection. Multipliers are returned on request.
Vector constrained_projection(const DgOperator& dg,
                              const std::function<double(const double*)>& f,
                              bool limiter, const NewtonConfig& newton_cfg,
                              Vector* multipliers = nullptr,
                              NewtonReport* report = nullptr);

} // namespace bpdg
