#include "bpdg/dirk.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace bpdg {

DirkTableau dirk_tableau(int order) {
  DirkTableau tb;
  tb.order = order;
  switch (order) {
    case 1: {
      tb.stages = 1;
      tb.a = Matrix::Constant(1, 1, 1.0);
      break;
    }
    case 2: {
      const double g = 1.0 - std::sqrt(2.0) / 2.0;
      tb.stages = 2;
      tb.a = Matrix::Zero(2, 2);
      tb.a << g, 0.0, 1.0 - g, g;
      break;
    }
    case 3: {
      const double g = 0.4358665215084590;
      const double b1 = -(6.0 * g * g - 16.0 * g + 1.0) / 4.0;
      const double b2 = (6.0 * g * g - 20.0 * g + 5.0) / 4.0;
      tb.stages = 3;
      tb.a = Matrix::Zero(3, 3);
      tb.a << g, 0.0, 0.0, (1.0 - g) / 2.0, g, 0.0, b1, b2, g;
      break;
    }
    case 4: {
      tb.stages = 5;
      tb.a = Matrix::Zero(5, 5);
      tb.a.row(0) << 0.25, 0, 0, 0, 0;
      tb.a.row(1) << 0.5, 0.25, 0, 0, 0;
      tb.a.row(2) << 17.0 / 50.0, -1.0 / 25.0, 0.25, 0, 0;
      tb.a.row(3) << 371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0;
      tb.a.row(4) << 25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25;
      break;
    }
    default:
      throw std::invalid_argument("dirk: order must be in 1..4");
  }
  tb.b = tb.a.row(tb.stages - 1);
  tb.c = tb.a.rowwise().sum();
  return tb;
}

ConstraintSet build_bound_constraints(const DgOperator& dg) {
  ConstraintSet cons;
  const auto& problem = dg.problem();
  const auto& rule = dg.volume_rule();
  const int nm = dg.n_modes();
  const int npts = rule.n();
  const Matrix phi = dg.basis().values_at(rule.points);

  std::vector<Triplet> trip;
  std::vector<double> cvals;
  for (int K = 0; K < dg.mesh().n_elements(); ++K) {
    for (int q = 0; q < npts; ++q) {
      double xi[2] = {rule.points(q, 0),
                      dg.mesh().dim == 2 ? rule.points(q, 1) : 0.0};
      double x[2];
      dg.map_to_physical(K, xi, x);
      if (problem.u_min.has_value()) {
        const int row = static_cast<int>(cvals.size());
        for (int j = 0; j < nm; ++j)
          trip.emplace_back(row, K * nm + j, -phi(q, j));
        cvals.push_back(*problem.u_min);
        cons.info.push_back({K, q, true, {x[0], x[1]}});
      }
      if (problem.u_max.has_value()) {
        const int row = static_cast<int>(cvals.size());
        for (int j = 0; j < nm; ++j)
          trip.emplace_back(row, K * nm + j, phi(q, j));
        cvals.push_back(-*problem.u_max);
        cons.info.push_back({K, q, false, {x[0], x[1]}});
      }
    }
  }
  cons.A.resize(static_cast<int>(cvals.size()), dg.n_u());
  cons.A.setFromTriplets(trip.begin(), trip.end());
  cons.c = Eigen::Map<Vector>(cvals.data(), cvals.size());
  return cons;
}

namespace {

struct SampleScales {
  double max_speed = 0.0;   // max over axes and points of |f'_a(u)| / h_a
  double max_visc = 0.0;
};

SampleScales sample_scales(const DgOperator& dg, const Vector& U) {
  SampleScales s;
  const auto& problem = dg.problem();
  if (!problem.has_flux && !problem.has_viscosity) return s;
  const Matrix vals = dg.point_values(U, dg.volume_rule().points);
  double hmin[2] = {dg.mesh().min_width(), dg.mesh().min_width()};
  double df[2];
  for (int e = 0; e < vals.rows(); ++e)
    for (int q = 0; q < vals.cols(); ++q) {
      const double u = vals(e, q);
      if (problem.has_flux) {
        problem.flux_deriv(u, df);
        double rate = 0.0;
        for (int a = 0; a < dg.mesh().dim; ++a)
          rate += std::abs(df[a]) / hmin[a];
        s.max_speed = std::max(s.max_speed, rate);
      }
      if (problem.has_viscosity)
        s.max_visc = std::max(s.max_visc, std::abs(problem.viscosity(u)));
    }
  return s;
}

struct StageSolve {
  bool converged = false;
  int iterations = 0;
  Vector lambda;
};

StageSolve solve_stage(const DgOperator& dg, const DgOperator::StageContext& ctx,
                       const ConstraintSet& cons, bool conserve,
                       bool mu_curvature, Vector& K, const NewtonConfig& ncfg) {
  StageSolve out;
  auto stage_res = [&](const Vector& X) { return dg.stage_residual(X, ctx); };
  auto stage_jac = [&](const Vector& X) { return dg.stage_jacobian(X, ctx); };

  if (cons.m() == 0) {
    auto jac = [&](const Vector& X, const Vector&) { return stage_jac(X); };
    NewtonReport rep = semismooth_newton(stage_res, jac, K, ncfg);
    out.converged = rep.converged;
    out.iterations = rep.iterations;
    return out;
  }

  InnerProblem inner;
  inner.n = dg.n_u();
  inner.residual = stage_res;
  inner.jacobian = stage_jac;
  if (conserve) {
    inner.eq_rows = dg.mean_rows();
    inner.eq_jacobian = [&](const Vector& X) { return dg.stage_eq_rows(X, ctx); };
    if (mu_curvature)
      inner.eq_curvature = [&](const Vector& X, const Vector& mu) {
        return dg.stage_eq_curvature(X, ctx, mu);
      };
  }
  KktSystem kkt(std::move(inner), cons);

  Vector z = Vector::Zero(kkt.size());
  z.head(dg.n_u()) = K;
  auto res = [&](const Vector& zz) { return kkt.residual(zz); };
  auto jac = [&](const Vector& zz, const Vector& d) {
    return kkt.quasi_jacobian(zz, d, ncfg.delta);
  };
  auto sizes = [&](const Vector& zz) {
    const auto cl = kkt.classify(zz, ncfg.delta);
    return std::array<int, 3>{static_cast<int>(cl.alpha.size()),
                              static_cast<int>(cl.beta.size()),
                              static_cast<int>(cl.gamma.size())};
  };
  NewtonReport rep = semismooth_newton(res, jac, z, ncfg, Vector(), sizes);
  if (!rep.converged && std::getenv("BPDG_TRACE_FAIL")) {
    std::cerr << "stage fail: dt=" << ctx.dt << " a_ii=" << ctx.a_ii
              << " c_i=" << ctx.c_i << " m=" << cons.m()
              << " iters=" << rep.iterations << " reason='" << rep.failure_reason
              << "' hist=";
    const int nh = static_cast<int>(rep.residual_history.size());
    for (int k = std::max(0, nh - 6); k < nh; ++k)
      std::cerr << rep.residual_history[k] << " ";
    std::cerr << "\n";
  }
  out.converged = rep.converged;
  out.iterations = rep.iterations;
  K = z.head(dg.n_u());
  out.lambda = z.tail(cons.m());
  return out;
}

// Rows of cons whose element currently has a value within margin of the
// bound the row protects. kept[j] records which rows survived.
ConstraintSet scoped_constraints(const DgOperator& dg, const ConstraintSet& cons,
                                 const Vector& U, double margin_frac,
                                 std::vector<char>* kept) {
  const auto& problem = dg.problem();
  const Matrix vals = dg.point_values(U, dg.volume_rule().points);
  double range;
  if (problem.u_min.has_value() && problem.u_max.has_value())
    range = *problem.u_max - *problem.u_min;
  else
    range = std::max(vals.maxCoeff() - vals.minCoeff(), 1.0);
  const double margin = margin_frac * range;

  std::vector<char> near_lo(dg.mesh().n_elements(), 0);
  std::vector<char> near_hi(dg.mesh().n_elements(), 0);
  for (int e = 0; e < vals.rows(); ++e) {
    if (problem.u_min.has_value() &&
        vals.row(e).minCoeff() - *problem.u_min <= margin)
      near_lo[e] = 1;
    if (problem.u_max.has_value() &&
        *problem.u_max - vals.row(e).maxCoeff() <= margin)
      near_hi[e] = 1;
  }

  ConstraintSet sub;
  std::vector<int> newrow(cons.m(), -1);
  int n_kept = 0;
  for (int j = 0; j < cons.m(); ++j) {
    const auto& info = cons.info[j];
    if (info.lower ? near_lo[info.element] : near_hi[info.element])
      newrow[j] = n_kept++;
  }
  if (kept) {
    kept->assign(cons.m(), 0);
    for (int j = 0; j < cons.m(); ++j) (*kept)[j] = newrow[j] >= 0;
  }
  sub.c.resize(n_kept);
  sub.info.resize(n_kept);
  for (int j = 0; j < cons.m(); ++j)
    if (newrow[j] >= 0) {
      sub.c[newrow[j]] = cons.c[j];
      sub.info[newrow[j]] = cons.info[j];
    }
  std::vector<Triplet> trip;
  trip.reserve(cons.A.nonZeros());
  for (int k = 0; k < cons.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(cons.A, k); it; ++it)
      if (newrow[it.row()] >= 0)
        trip.emplace_back(newrow[it.row()], static_cast<int>(it.col()),
                          it.value());
  sub.A.resize(n_kept, cons.n());
  sub.A.setFromTriplets(trip.begin(), trip.end());
  return sub;
}

} // namespace

DirkResult integrate(const DgOperator& dg, Vector& U, const DirkOptions& opt) {
  DirkResult out;
  const auto& problem = dg.problem();
  const DirkTableau tb = dirk_tableau(opt.order);
  const int n = dg.n_u();
  const double hmin = dg.mesh().min_width();

  ConstraintSet cons;
  if (opt.limiter) cons = build_bound_constraints(dg);
  const bool limited = cons.m() > 0;

  double mult_cap;
  if (opt.cfl > 0)
    mult_cap = opt.cfl;
  else if (problem.has_flux)
    mult_cap = problem.cfl_cap > 0 ? problem.cfl_cap : 1.0;
  else
    mult_cap = 1e6;  // dt_max and the diffusion cap still bound the step
  double mult = problem.has_flux && problem.cfl_init > 0 && opt.cfl <= 0
                    ? problem.cfl_init
                    : mult_cap;
  mult = std::min(mult, mult_cap);

  double t = opt.t_start;
  std::vector<Vector> stage_rates(tb.stages);
  Vector K;
  Vector last_lambda;
  ConstraintSet last_sub;
  bool last_was_sub = false;
  bool force_full = false;

  while (t < opt.t_end - 1e-14 * std::max(1.0, std::abs(opt.t_end))) {
    if (out.steps + out.rejected >= opt.max_steps) {
      out.message = "step limit reached";
      return out;
    }

    const SampleScales sc = sample_scales(dg, U);
    double dt;
    if (opt.fixed_dt > 0) {
      dt = opt.fixed_dt;
    } else {
      dt = std::numeric_limits<double>::infinity();
      if (problem.has_flux && sc.max_speed > 0)
        dt = std::min(dt, mult / sc.max_speed);
      if (problem.diff_cap > 0 && sc.max_visc > 0)
        dt = std::min(dt, (problem.has_flux ? 1.0 : mult) * problem.diff_cap *
                              hmin * hmin / sc.max_visc);
      if (problem.dt_max > 0)
        dt = std::min(dt, (problem.has_flux || problem.diff_cap > 0 ? 1.0 : mult) *
                              problem.dt_max);
      if (!std::isfinite(dt)) {
        out.message = "no time-step scale: set dt_max or fixed_dt";
        return out;
      }
    }
    if (t + dt >= opt.t_end - 1e-12 * dt) dt = opt.t_end - t;

    ConstraintSet sub;
    std::vector<char> kept_rows;
    const ConstraintSet* step_cons = &cons;
    if (limited && opt.scope_near && !force_full) {
      sub = scoped_constraints(dg, cons, U, opt.scope_margin, &kept_rows);
      step_cons = &sub;
    }

    bool ok = true;
    int iter_max = 0;
    Vector lambda;
    Vector U_stage = U;
    DgOperator::StageContext ctx;
    for (int i = 0; i < tb.stages && ok; ++i) {
      ctx.U_n = &U;
      ctx.t_n = t;
      ctx.dt = dt;
      ctx.a_ii = tb.a(i, i);
      ctx.c_i = tb.c[i];
      ctx.accumulated = Vector();
      if (i > 0) {
        ctx.accumulated = Vector::Zero(n);
        for (int j = 0; j < i; ++j)
          ctx.accumulated += dt * tb.a(i, j) * stage_rates[j];
      }
      K = U_stage;
      StageSolve st =
          solve_stage(dg, ctx, *step_cons, limited && opt.conserve,
                      opt.mu_curvature, K, opt.newton);
      iter_max = std::max(iter_max, st.iterations);
      out.total_newton_iterations += st.iterations;
      if (!st.converged) {
        ok = false;
        break;
      }
      U_stage = K;
      lambda = std::move(st.lambda);
      stage_rates[i] =
          dg.residual_L1(K, dg.eliminate_Q(K, ctx.stage_time()), ctx.stage_time());
    }

    if (!ok) {
      ++out.rejected;
      if (opt.fixed_dt > 0) {
        out.message = "stage solve failed with fixed step";
        return out;
      }
      mult *= 0.5;
      if (mult < opt.dt_min) {
        out.message = "time step collapsed";
        return out;
      }
      continue;
    }

    if (step_cons == &sub && sub.m() < cons.m()) {
      // Rows that were solved against may carry feasibility noise at the
      // Newton tolerance; only a violation on a dropped row means the scope
      // guessed wrong and the step must be redone with every row present.
      const Vector g_full = cons.values(U_stage);
      bool dropped_active = false;
      for (int j = 0; j < cons.m() && !dropped_active; ++j)
        dropped_active = !kept_rows[j] && g_full[j] > 1e-12;
      if (dropped_active) {
        force_full = true;
        continue;
      }
    }
    force_full = false;

    // Mean rows of the last stage residual. Stiff accuracy makes this the
    // conservation defect of the completed step.
    double cons_defect = 0.0;
    {
      const Vector rs = dg.stage_residual(U_stage, ctx);
      for (int r : dg.mean_rows())
        cons_defect = std::max(cons_defect, std::abs(rs[r]));
    }

    const double change_rate = problem.steady_target > 0
                                   ? (U_stage - U).lpNorm<Eigen::Infinity>() / dt
                                   : 0.0;
    U = U_stage;
    t += dt;
    ++out.steps;
    last_lambda = lambda;
    last_was_sub = step_cons == &sub;
    if (last_was_sub) last_sub = std::move(sub);

    StepRecord rec;
    rec.t = t;
    rec.dt = dt;
    rec.cfl = sc.max_speed * dt;
    rec.newton_iterations = iter_max;
    const Matrix vals = dg.point_values(U, dg.volume_rule().points);
    rec.min_u = vals.minCoeff();
    rec.max_u = vals.maxCoeff();
    rec.conservation = cons_defect;
    if (lambda.size() > 0)
      rec.active_multipliers =
          static_cast<int>((lambda.array().abs() > 1e-10).count());
    out.records.push_back(rec);
    if (opt.on_step) opt.on_step(rec, lambda, last_was_sub ? last_sub : cons);

    if (opt.fixed_dt == 0) {
      if (iter_max < opt.band_low)
        mult = std::min(mult * opt.growth, mult_cap);
      else if (iter_max > opt.band_high)
        mult = std::max(mult / opt.growth, opt.dt_min);
    }

    if (problem.steady_target > 0) {
      out.steady_residual = change_rate;
      if (out.steady_residual <= problem.steady_target) break;
    }
  }

  out.ok = true;
  out.t_final = t;
  out.last_multipliers = std::move(last_lambda);
  out.last_constraints = last_was_sub ? std::move(last_sub) : std::move(cons);
  return out;
}

Vector constrained_projection(const DgOperator& dg,
                              const std::function<double(const double*)>& f,
                              bool limiter, const NewtonConfig& newton_cfg,
                              Vector* multipliers, NewtonReport* report) {
  const auto& rule = dg.volume_rule();
  const int nm = dg.n_modes();
  const int dim = dg.mesh().dim;
  const Matrix phi = dg.basis().values_at(rule.points);

  Vector rhs = Vector::Zero(dg.n_u());
  for (int K = 0; K < dg.mesh().n_elements(); ++K) {
    const double jac = dg.mesh().elements[K].measure(dim) / (dim == 1 ? 2.0 : 4.0);
    for (int q = 0; q < rule.n(); ++q) {
      double xi[2] = {rule.points(q, 0), dim == 2 ? rule.points(q, 1) : 0.0};
      double x[2];
      dg.map_to_physical(K, xi, x);
      const double fv = f(x);
      for (int j = 0; j < nm; ++j)
        rhs[K * nm + j] += rule.weights[q] * jac * fv * phi(q, j);
    }
  }
  Vector x0 = rhs.cwiseQuotient(dg.mass().diag);

  ConstraintSet cons;
  if (limiter) cons = build_bound_constraints(dg);
  if (cons.m() == 0) {
    if (multipliers) multipliers->resize(0);
    if (report) {
      NewtonReport rep;
      rep.converged = true;
      *report = rep;
    }
    return x0;
  }

  InnerProblem inner;
  inner.n = dg.n_u();
  const Vector mass = dg.mass().diag;
  inner.residual = [mass, rhs](const Vector& x) {
    return Vector(mass.cwiseProduct(x) - rhs);
  };
  inner.jacobian = [mass](const Vector&) {
    SpMat M(mass.size(), mass.size());
    std::vector<Triplet> trip;
    trip.reserve(mass.size());
    for (int i = 0; i < mass.size(); ++i) trip.emplace_back(i, i, mass[i]);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  };
  KktSystem kkt(std::move(inner), std::move(cons));

  Vector z = Vector::Zero(kkt.size());
  z.head(dg.n_u()) = x0;
  auto res = [&](const Vector& zz) { return kkt.residual(zz); };
  auto jac = [&](const Vector& zz, const Vector& d) {
    return kkt.quasi_jacobian(zz, d, newton_cfg.delta);
  };
  auto sizes = [&](const Vector& zz) {
    const auto cl = kkt.classify(zz, newton_cfg.delta);
    return std::array<int, 3>{static_cast<int>(cl.alpha.size()),
                              static_cast<int>(cl.beta.size()),
                              static_cast<int>(cl.gamma.size())};
  };
  NewtonReport rep = semismooth_newton(res, jac, z, newton_cfg, Vector(), sizes);
  if (report) *report = rep;
  if (multipliers) *multipliers = z.tail(kkt.m());
  return z.head(dg.n_u());
}

} // namespace bpdg
