#ifndef BPDG_PROBLEM_HPP
#define BPDG_PROBLEM_HPP

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bpdg/mesh.hpp"
#include "bpdg/types.hpp"

namespace bpdg {

// Scalar conservation-diffusion model problem
//   u_t + div F(u) + G(u,x) - div(nu(u) grad u) = 0
// with optional pointwise bounds u_min <= u <= u_max to be enforced by the
// solver. All callbacks must be finite for u in [u_min - 1, u_max + 1] when
// the bounds are present (solver iterates may overshoot slightly).
struct ProblemSpec {
  std::string name;
  int dim = 1;

  // F(u): writes dim components; dF its u-derivative per component.
  std::function<void(double, double*)> flux;
  std::function<void(double, double*)> flux_deriv;
  bool has_flux = true;

  // G(u, x, t) and dG/du.
  std::function<double(double, const double*, double)> source;
  std::function<double(double, const double*, double)> source_deriv;
  bool has_source = false;

  // nu(u) >= 0 on [u_min, u_max]; nu' its derivative.
  std::function<double(double)> viscosity;
  std::function<double(double)> viscosity_deriv;
  bool has_viscosity = false;

  std::optional<double> u_min;
  std::optional<double> u_max;

  std::function<double(const double*)> initial;
  std::optional<std::function<double(const double*, double)>> exact;

  // Boundary data for Dirichlet sides; Q_b (dim components) falls back to
  // the interior trace when absent.
  std::function<double(const double*, double)> dirichlet_u;
  std::optional<std::function<void(const double*, double, double*)>> dirichlet_Q;

  std::array<std::array<double, 2>, 2> domain{};
  std::vector<BcTag> bc;  // one tag per side: x_lo, x_hi[, y_lo, y_hi]

  // True when the semi-discrete residual is affine in the coefficients
  // (linear flux, no viscosity, source linear in u); lets the stage solver
  // skip curvature estimation.
  bool residual_affine = false;

  // Recommended run parameters (config defaults, all overridable).
  double cfl_cap = 1.0;
  double cfl_init = 0.0;    // 0: start at cfl_cap
  double diff_cap = 0.0;    // 0: no diffusion-number restriction
  double dt_max = 0.0;      // 0: unrestricted
  double t_start_default = 0.0;
  double t_end_default = 1.0;
  double steady_target = 0.0;  // 0: pure t_end stopping
};

// Construct a catalog problem by name. Recognized names:
//   advection-steady, burgers-steady, advection-1d, advection-2d,
//   burgers-1d, allen-cahn-1d, allen-cahn-2d, barenblatt-1d, barenblatt-2d,
//   buckley-leverett, buckley-leverett-gravity
// params supplies problem constants (nu_bar, m, C, ramp_m, mesh_h as
// applicable); unknown keys are rejected.
ProblemSpec make_problem(const std::string& name,
                         const std::map<std::string, double>& params = {});

std::vector<std::string> problem_names();

} // namespace bpdg

#endif
