#include "bpdg/problem.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace bpdg {

namespace {

double get_param(const std::map<std::string, double>& params,
                 const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void check_keys(const std::map<std::string, double>& params,
                const std::set<std::string>& allowed, const std::string& name) {
  for (const auto& [key, value] : params) {
    (void)value;
    if (!allowed.count(key))
      throw std::invalid_argument("problem '" + name + "': unknown parameter '" + key + "'");
  }
}

void zero_flux(double, double* f) { f[0] = 0.0; f[1] = 0.0; }

// Kurganov-Tadmor two-phase flux u^2 / (u^2 + (1-u)^2), clamped to its
// limits outside [0,1] so that iterates slightly outside stay well defined.
double bl_f(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  double d = u * u + (1.0 - u) * (1.0 - u);
  return u * u / d;
}

double bl_df(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  double d = u * u + (1.0 - u) * (1.0 - u);
  return 2.0 * u * (1.0 - u) / (d * d);
}

}  // namespace

ProblemSpec make_problem(const std::string& name,
                         const std::map<std::string, double>& params) {
  ProblemSpec p;
  p.name = name;

  if (name == "advection-steady") {
    check_keys(params, {}, name);
    p.dim = 1;
    p.flux = [](double u, double* f) { f[0] = u; };
    p.flux_deriv = [](double, double* df) { df[0] = 1.0; };
    p.has_source = true;
    p.source = [](double, const double* x, double) {
      double s = std::sin(x[0]);
      return -(s * s * s * s);
    };
    p.source_deriv = [](double, const double*, double) { return 0.0; };
    p.u_min = 1e-14;
    p.initial = [](const double* x) {
      double s = std::sin(x[0]);
      return s * s;
    };
    // Steady profile: antiderivative of sin^4.
    p.exact = [](const double* x, double) {
      return 3.0 * x[0] / 8.0 - std::sin(2.0 * x[0]) / 4.0 + std::sin(4.0 * x[0]) / 32.0;
    };
    p.dirichlet_u = [](const double*, double) { return 0.0; };
    p.domain = {{{0.0, 2.0 * M_PI}, {0.0, 0.0}}};
    p.bc = {BcTag::Dirichlet, BcTag::Outflow};
    p.residual_affine = true;
    p.cfl_cap = 89.0;
    p.cfl_init = 10.0;
    p.t_end_default = 500.0;
    p.steady_target = 1e-13;
  } else if (name == "burgers-steady") {
    check_keys(params, {}, name);
    p.dim = 1;
    p.flux = [](double u, double* f) { f[0] = 0.5 * u * u; };
    p.flux_deriv = [](double u, double* df) { df[0] = u; };
    p.has_source = true;
    p.source = [](double, const double* x, double) {
      double s = std::sin(x[0] / 4.0);
      return -(s * s * s);
    };
    p.source_deriv = [](double, const double*, double) { return 0.0; };
    p.u_min = 1e-14;
    p.initial = [](const double* x) {
      double s = std::sin(x[0] / 4.0);
      return s * s;
    };
    // Steady profile from (u^2/2)' = sin^3(x/4) with u(0) = 0.
    p.exact = [](const double* x, double) {
      double c = std::cos(x[0] / 4.0);
      return std::sqrt(std::max(0.0, 8.0 * c * c * c / 3.0 - 8.0 * c + 16.0 / 3.0));
    };
    p.dirichlet_u = [](const double*, double) { return 0.0; };
    p.domain = {{{0.0, 2.0 * M_PI}, {0.0, 0.0}}};
    p.bc = {BcTag::Dirichlet, BcTag::Outflow};
    p.cfl_cap = 954.0;
    p.cfl_init = 10.0;
    p.t_end_default = 20000.0;
    p.steady_target = 1e-13;
  } else if (name == "advection-1d") {
    check_keys(params, {}, name);
    p.dim = 1;
    p.flux = [](double u, double* f) { f[0] = u; };
    p.flux_deriv = [](double, double* df) { df[0] = 1.0; };
    p.u_min = 1e-10;
    p.initial = [](const double* x) {
      return std::max(std::cos(2.0 * M_PI * x[0] / 10.0), 0.0);
    };
    p.exact = [](const double* x, double t) {
      return std::max(std::cos(2.0 * M_PI * (x[0] - t) / 10.0), 0.0);
    };
    p.domain = {{{0.0, 10.0}, {0.0, 0.0}}};
    p.bc = {BcTag::Periodic, BcTag::Periodic};
    p.residual_affine = true;
    p.cfl_cap = 1.0;
    p.t_end_default = 20.0;
  } else if (name == "advection-2d") {
    check_keys(params, {}, name);
    p.dim = 2;
    p.flux = [](double u, double* f) {
      f[0] = -u;
      f[1] = -2.0 * u;
    };
    p.flux_deriv = [](double, double* df) {
      df[0] = -1.0;
      df[1] = -2.0;
    };
    p.u_min = 1e-10;
    p.initial = [](const double* x) {
      return std::max(std::cos(2.0 * M_PI * x[0] / 3.0) * std::cos(2.0 * M_PI * x[1] / 3.0), 0.0);
    };
    p.exact = [](const double* x, double t) {
      return std::max(std::cos(2.0 * M_PI * (x[0] + t) / 3.0) *
                          std::cos(2.0 * M_PI * (x[1] + 2.0 * t) / 3.0),
                      0.0);
    };
    p.domain = {{{0.0, 3.0}, {0.0, 3.0}}};
    p.bc = {BcTag::Periodic, BcTag::Periodic, BcTag::Periodic, BcTag::Periodic};
    p.residual_affine = true;
    p.cfl_cap = 1.0;
    p.t_end_default = 1.0;
  } else if (name == "burgers-1d") {
    check_keys(params, {}, name);
    p.dim = 1;
    p.flux = [](double u, double* f) { f[0] = 0.5 * u * u; };
    p.flux_deriv = [](double u, double* df) { df[0] = u; };
    p.u_min = 1e-10;
    p.u_max = 1.0;
    p.initial = [](const double* x) {
      return std::max(std::cos(M_PI * x[0]), 0.0);
    };
    p.domain = {{{-1.0, 1.0}, {0.0, 0.0}}};
    p.bc = {BcTag::Periodic, BcTag::Periodic};
    p.cfl_cap = 1.0;
    p.t_end_default = 0.65;
  } else if (name == "allen-cahn-1d" || name == "allen-cahn-2d") {
    const bool two_d = name == "allen-cahn-2d";
    check_keys(params, {"nu_bar"}, name);
    const double nu_bar = get_param(params, "nu_bar", two_d ? 1e-4 : 1e-5);
    if (nu_bar <= 0.0) throw std::invalid_argument("allen-cahn: nu_bar must be > 0");
    const double w = 2.0 * std::sqrt(2.0 * nu_bar);  // interface width scale
    const double speed = 3.0 * std::sqrt(nu_bar / 2.0);
    p.dim = two_d ? 2 : 1;
    p.flux = zero_flux;
    p.flux_deriv = zero_flux;
    p.has_flux = false;
    p.has_source = true;
    p.source = [](double u, const double*, double) { return u * u * u - u; };
    p.source_deriv = [](double u, const double*, double) { return 3.0 * u * u - 1.0; };
    p.has_viscosity = true;
    p.viscosity = [nu_bar](double) { return nu_bar; };
    p.viscosity_deriv = [](double) { return 0.0; };
    p.u_min = 1e-14;
    p.u_max = 1.0 - 1e-10;
    if (!two_d) {
      p.exact = [w, speed](const double* x, double t) {
        return 0.5 * (1.0 - std::tanh((x[0] - speed * t) / w));
      };
      p.initial = [exact = *p.exact](const double* x) { return exact(x, 0.0); };
      p.dirichlet_u = [exact = *p.exact](const double* x, double t) { return exact(x, t); };
      p.dirichlet_Q = [w, speed](const double* x, double t, double* q) {
        double s = 1.0 / std::cosh((x[0] - speed * t) / w);
        q[0] = -0.5 * s * s / w;
      };
      p.domain = {{{-0.5, 2.0}, {0.0, 0.0}}};
      p.bc = {BcTag::Dirichlet, BcTag::Dirichlet};
    } else {
      p.initial = [w](const double* x) {
        return 0.25 * (1.0 - std::tanh(x[0] / w)) * (1.0 - std::tanh(x[1] / w));
      };
      p.dirichlet_u = [initial = p.initial](const double* x, double) { return initial(x); };
      p.domain = {{{-0.5, 2.0}, {-0.5, 2.0}}};
      p.bc = {BcTag::Dirichlet, BcTag::Dirichlet, BcTag::Dirichlet, BcTag::Dirichlet};
    }
    p.cfl_cap = 0.0;
    p.diff_cap = 0.0;
    p.dt_max = two_d ? 0.1 : 0.5;
    p.t_end_default = two_d ? 10.0 : 50.0;
  } else if (name == "barenblatt-1d" || name == "barenblatt-2d") {
    const bool two_d = name == "barenblatt-2d";
    check_keys(params, {"m", "C"}, name);
    const double m = get_param(params, "m", 8.0);
    const double C = get_param(params, "C", 1.0);
    if (m <= 1.0) throw std::invalid_argument("barenblatt: m must be > 1");
    const int mi = static_cast<int>(std::lround(m));
    const bool integer_m = std::abs(m - mi) < 1e-12;
    const double n_dim = two_d ? 2.0 : 1.0;
    const double alpha = n_dim / (n_dim * (m - 1.0) + 2.0);
    const double beta = alpha / n_dim;
    const double k = beta * (m - 1.0) / (2.0 * m);
    p.dim = two_d ? 2 : 1;
    p.flux = zero_flux;
    p.flux_deriv = zero_flux;
    p.has_flux = false;
    p.has_viscosity = true;
    // nu(u) = m u^(m-1); for integer m the sign follows u (odd powers go
    // negative, which is exactly the failure mode without the limiter).
    if (integer_m) {
      p.viscosity = [m, mi](double u) { return m * std::pow(u, mi - 1); };
      p.viscosity_deriv = [m, mi](double u) {
        return m * (mi - 1) * std::pow(u, mi - 2);
      };
    } else {
      p.viscosity = [m](double u) { return u > 0.0 ? m * std::pow(u, m - 1.0) : 0.0; };
      p.viscosity_deriv = [m](double u) {
        return u > 0.0 ? m * (m - 1.0) * std::pow(u, m - 2.0) : 0.0;
      };
    }
    p.u_min = 1e-10;
    const double m_exp = 1.0 / (m - 1.0);
    auto exact = [alpha, beta, k, C, m_exp, two_d](const double* x, double t) {
      double r2 = x[0] * x[0] + (two_d ? x[1] * x[1] : 0.0);
      double core = C - k * r2 * std::pow(t, -2.0 * beta);
      if (core <= 0.0) return 0.0;
      return std::pow(t, -alpha) * std::pow(core, m_exp);
    };
    p.exact = exact;
    p.initial = [exact](const double* x) { return exact(x, 1.0); };
    p.dirichlet_u = [exact](const double* x, double t) { return exact(x, t); };
    p.dirichlet_Q = [](const double*, double, double* q) { q[0] = 0.0; q[1] = 0.0; };
    if (!two_d) {
      p.domain = {{{-7.0, 7.0}, {0.0, 0.0}}};
      p.bc = {BcTag::Dirichlet, BcTag::Dirichlet};
    } else {
      p.domain = {{{-7.0, 7.0}, {-7.0, 7.0}}};
      p.bc = {BcTag::Dirichlet, BcTag::Dirichlet, BcTag::Dirichlet, BcTag::Dirichlet};
    }
    p.diff_cap = 2.0;
    p.dt_max = 0.02;
    p.t_start_default = 1.0;  // runs start at the t = 1 profile
    p.t_end_default = 2.0;
  } else if (name == "buckley-leverett" || name == "buckley-leverett-gravity") {
    const bool gravity = name == "buckley-leverett-gravity";
    check_keys(params, gravity ? std::set<std::string>{"nu_bar", "ramp_m", "mesh_h"}
                               : std::set<std::string>{"nu_bar"},
               name);
    const double nu_bar = get_param(params, "nu_bar", 0.01);
    p.dim = 1;
    if (!gravity) {
      p.flux = [](double u, double* f) { f[0] = bl_f(u); };
      p.flux_deriv = [](double u, double* df) { df[0] = bl_df(u); };
      p.initial = [](const double* x) {
        return x[0] <= 0.33 ? std::max(0.99 - 3.0 * x[0], 0.0) : 0.0;
      };
      p.dirichlet_u = [](const double*, double) { return 0.99; };
    } else {
      p.flux = [](double u, double* f) {
        f[0] = u >= 1.0 ? 1.0 : bl_f(u) * (1.0 - 5.0 * (1.0 - u) * (1.0 - u));
      };
      p.flux_deriv = [](double u, double* df) {
        if (u >= 1.0) {
          df[0] = 0.0;
          return;
        }
        double g = 1.0 - 5.0 * (1.0 - u) * (1.0 - u);
        df[0] = bl_df(u) * g + bl_f(u) * 10.0 * (1.0 - u);
      };
      const double ramp_m = get_param(params, "ramp_m", 3.0);
      const double mesh_h = get_param(params, "mesh_h", 0.01);
      const double top = 1.0 - 1.0 / std::sqrt(2.0);
      const double a = top - ramp_m * mesh_h;
      p.initial = [a, top, ramp_m, mesh_h](const double* x) {
        if (x[0] <= a) return 0.0;
        if (x[0] <= top) return (x[0] - a) / (ramp_m * mesh_h);
        return 1.0;
      };
      p.dirichlet_u = [](const double*, double) { return 0.0; };
    }
    p.has_viscosity = true;
    p.viscosity = [nu_bar](double u) {
      return (u >= 0.0 && u <= 1.0) ? 4.0 * nu_bar * u * (1.0 - u) : 0.0;
    };
    p.viscosity_deriv = [nu_bar](double u) {
      return (u >= 0.0 && u <= 1.0) ? 4.0 * nu_bar * (1.0 - 2.0 * u) : 0.0;
    };
    p.u_min = 1e-10;
    p.u_max = 1.0 - 1e-10;
    p.domain = {{{0.0, 1.0}, {0.0, 0.0}}};
    p.bc = {BcTag::Dirichlet, BcTag::Outflow};
    p.cfl_cap = 1.0;
    p.diff_cap = 2.0;
    p.t_end_default = 0.2;
  } else {
    throw std::invalid_argument("unknown problem '" + name + "'");
  }
  return p;
}

std::vector<std::string> problem_names() {
  return {"advection-steady",  "burgers-steady",   "advection-1d",
          "advection-2d",      "burgers-1d",       "allen-cahn-1d",
          "allen-cahn-2d",     "barenblatt-1d",    "barenblatt-2d",
          "buckley-leverett",  "buckley-leverett-gravity"};
}

} // namespace bpdg
