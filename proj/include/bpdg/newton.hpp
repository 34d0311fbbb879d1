#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "bpdg/types.hpp"

namespace bpdg {

struct NewtonConfig {
  double alpha_bar = 1e-12;      // normal-equation regularization weight
  double beta = 0.5;             // backtracking ratio
  double gamma = 0.5;            // full-step residual reduction factor
  double sigma = 1e-9;           // sufficient-decrease constant
  double delta = 1e-12;          // kink band half-width passed to the Jacobian
  double eps = 1e-8;             // tolerance on |F| and on the last step
  double full_step_bound = 1e8;  // try the full step when |h| <= bound * |F|
  int max_ls_exponent = 30;
  int max_iterations = 500;
  bool scale_variables = true;
  bool equilibrate = true;
  int dense_threshold = 500;     // solve densely when the system is this small
};

struct NewtonReport {
  struct Iteration {
    double residual_norm = 0.0;      // |F| entering the iteration
    bool full_step = false;
    double step_scale = 0.0;         // accepted fraction of the direction
    int ls_exponent = 0;             // backtracking exponent, 0 for full steps
    std::array<int, 3> set_sizes{};  // |alpha|, |beta|, |gamma| if classified
  };

  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;   // final |F|
  double step_norm = 0.0;       // final step length in scaled variables
  int linear_solves = 0;
  int cod_fallbacks = 0;
  std::string failure_reason;   // empty on success
  std::vector<double> residual_history;
  std::vector<Iteration> trace;  // one entry per iteration
};

// Diagonal scaling S_jj = max(|z0_j|, typical_j); empty typical means 1.
Vector newton_scaling(const Vector& z0, const Vector& typical);

// Power-of-two L-inf equilibration. Symmetric input gets equal row and
// column scales; otherwise rows and columns are scaled alternately. Row and
// column maxima of diag(row) M diag(col) land in [1/2, 2] within max_sweeps
// passes. Structurally zero rows and columns keep scale 1 and are reported.
struct EquilibrateResult {
  Vector row;
  Vector col;
  std::vector<int> zero_rows;
  std::vector<int> zero_cols;
};
EquilibrateResult equilibrate_linf(const Matrix& M, int max_sweeps = 10);
EquilibrateResult equilibrate_linf(const SpMat& M, int max_sweeps = 10);

// Symmetric special case used on Gauss-Newton normal matrices.
Vector symmetric_equilibrate(const SpMat& N, int max_sweeps = 10);
Vector symmetric_equilibrate(const Matrix& N, int max_sweeps = 10);

// Solves (G^T G + reg I) h = -G^T F, equilibrated, dense or sparse by size;
// falls back to a minimum-norm least-squares solve on degeneracy.
Vector gauss_newton_direction(const SpMat& G, const Vector& F, double reg,
                              const NewtonConfig& cfg, int* cod_fallbacks);

// Damped semi-smooth Newton iteration on residual(z) = 0. The jacobian
// callback receives the previous accepted direction, which selects the
// matrix representative at kinks. z holds the initial guess and the result.
// Norms in the stopping tests are Euclidean norms of the scaled variables.
// An exhausted line search or the iteration cap ends the solve with
// converged = false and a failure_reason; a non-finite residual at an
// accepted point throws.
NewtonReport semismooth_newton(
    const std::function<Vector(const Vector&)>& residual,
    const std::function<SpMat(const Vector&, const Vector&)>& jacobian,
    Vector& z, const NewtonConfig& cfg = {}, const Vector& typical = Vector(),
    const std::function<std::array<int, 3>(const Vector&)>& set_sizes = {});

} // namespace bpdg
