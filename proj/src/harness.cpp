#include "bpdg/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "bpdg/problem.hpp"

namespace bpdg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Matrix equispaced_points(int dim, int per_axis) {
  Matrix pts;
  if (dim == 1) {
    pts.resize(per_axis, 1);
    for (int k = 0; k < per_axis; ++k)
      pts(k, 0) = -1.0 + 2.0 * k / (per_axis - 1.0);
  } else {
    pts.resize(per_axis * per_axis, 2);
    int r = 0;
    for (int ky = 0; ky < per_axis; ++ky)
      for (int kx = 0; kx < per_axis; ++kx, ++r) {
        pts(r, 0) = -1.0 + 2.0 * kx / (per_axis - 1.0);
        pts(r, 1) = -1.0 + 2.0 * ky / (per_axis - 1.0);
      }
  }
  return pts;
}

struct Built {
  std::shared_ptr<DgOperator> dg;
  double t_start = 0.0;
  double t_end = 0.0;
};

Built build_operator(const RunConfig& cfg) {
  ProblemSpec prob;
  try {
    prob = make_problem(cfg.problem, cfg.params);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  std::array<int, 2> counts = {cfg.nx, 1};
  if (prob.dim == 2) counts[1] = cfg.ny > 0 ? cfg.ny : cfg.nx;
  Mesh mesh = build_mesh(prob.dim, prob.domain, counts, prob.bc);
  Basis basis(prob.dim, cfg.degree);

  Built out;
  out.t_start = std::isnan(cfg.t_start) ? prob.t_start_default : cfg.t_start;
  out.t_end = std::isnan(cfg.t_end) ? prob.t_end_default : cfg.t_end;
  out.dg = std::make_shared<DgOperator>(std::move(mesh), std::move(basis),
                                        std::move(prob), cfg.upwind_alpha);
  if (out.t_end <= out.t_start && out.dg->problem().steady_target == 0)
    throw ConfigError("time.t_end must exceed the start time");
  return out;
}

} // namespace

std::pair<double, double> error_norms(const DgOperator& dg, const Vector& U,
                                      double t) {
  const auto& prob = dg.problem();
  if (!prob.exact.has_value()) return {-1.0, -1.0};
  const int dim = dg.mesh().dim;
  const int p = dg.basis().degree();

  QuadratureRule rule = quadrature_1d(QuadFamily::GaussLegendre, p + 2);
  if (dim == 2) rule = tensorize(rule);
  const Matrix vals = dg.point_values(U, rule.points);
  double l2 = 0.0;
  for (int K = 0; K < dg.mesh().n_elements(); ++K) {
    const double jac =
        dg.mesh().elements[K].measure(dim) / (dim == 1 ? 2.0 : 4.0);
    for (int q = 0; q < rule.n(); ++q) {
      double xi[2] = {rule.points(q, 0), dim == 2 ? rule.points(q, 1) : 0.0};
      double x[2];
      dg.map_to_physical(K, xi, x);
      const double diff = vals(K, q) - (*prob.exact)(x, t);
      l2 += rule.weights[q] * jac * diff * diff;
    }
  }

  const Matrix pts = equispaced_points(dim, 4 * (p + 1));
  const Matrix sv = dg.point_values(U, pts);
  double linf = 0.0;
  for (int K = 0; K < dg.mesh().n_elements(); ++K)
    for (int q = 0; q < pts.rows(); ++q) {
      double xi[2] = {pts(q, 0), dim == 2 ? pts(q, 1) : 0.0};
      double x[2];
      dg.map_to_physical(K, xi, x);
      linf = std::max(linf, std::abs(sv(K, q) - (*prob.exact)(x, t)));
    }
  return {std::sqrt(l2), linf};
}

Matrix sample_solution(const DgOperator& dg, const Vector& U, double t) {
  const int dim = dg.mesh().dim;
  const int nm = dg.n_modes();
  const Matrix pts = equispaced_points(dim, 4 * (dg.basis().degree() + 1));
  const Matrix vals = dg.point_values(U, pts);

  const Vector Q = dg.eliminate_Q(U, t);
  std::vector<Matrix> qvals(dim);
  for (int a = 0; a < dim; ++a) {
    Vector Qa(dg.n_u());
    for (int K = 0; K < dg.mesh().n_elements(); ++K)
      Qa.segment(K * nm, nm) = Q.segment((K * dim + a) * nm, nm);
    qvals[a] = dg.point_values(Qa, pts);
  }

  Matrix out(dg.mesh().n_elements() * pts.rows(), 2 * dim + 1);
  int r = 0;
  for (int K = 0; K < dg.mesh().n_elements(); ++K)
    for (int q = 0; q < pts.rows(); ++q, ++r) {
      double xi[2] = {pts(q, 0), dim == 2 ? pts(q, 1) : 0.0};
      double x[2];
      dg.map_to_physical(K, xi, x);
      out(r, 0) = x[0];
      if (dim == 2) out(r, 1) = x[1];
      out(r, dim) = vals(K, q);
      for (int a = 0; a < dim; ++a) out(r, dim + 1 + a) = qvals[a](K, q);
    }
  return out;
}

RunResult run_experiment(const RunConfig& cfg) {
  Built built = build_operator(cfg);
  RunResult res;
  res.dg = built.dg;
  const auto& prob = res.dg->problem();

  auto initial = [&prob](const double* x) { return prob.initial(x); };
  res.U = constrained_projection(*res.dg, initial, cfg.limiter, cfg.newton);

  DirkOptions opt;
  opt.order = cfg.order;
  opt.t_start = built.t_start;
  opt.t_end = built.t_end;
  opt.limiter = cfg.limiter;
  opt.conserve = cfg.conserve < 0 ? res.dg->mesh().dim == 1 : cfg.conserve != 0;
  opt.mu_curvature = cfg.mu_curvature;
  opt.scope_near = cfg.scope_near;
  opt.scope_margin = cfg.scope_margin;
  opt.cfl = cfg.cfl;
  opt.fixed_dt = cfg.fixed_dt;
  opt.max_steps = cfg.max_steps;
  opt.newton = cfg.newton;
  res.dirk = integrate(*res.dg, res.U, opt);
  res.t_final = res.dirk.ok ? res.dirk.t_final : built.t_start;

  res.run_min_u = res.dg->point_values(res.U, res.dg->volume_rule().points)
                      .minCoeff();
  for (const auto& rec : res.dirk.records)
    res.run_min_u = std::min(res.run_min_u, rec.min_u);

  if (res.dirk.ok && prob.exact.has_value()) {
    auto [l2, linf] = error_norms(*res.dg, res.U, res.t_final);
    res.l2_error = l2;
    res.linf_error = linf;
  }
  return res;
}

RunResult project_experiment(const RunConfig& cfg, Vector* multipliers) {
  Built built = build_operator(cfg);
  RunResult res;
  res.dg = built.dg;
  const auto& prob = res.dg->problem();
  auto initial = [&prob](const double* x) { return prob.initial(x); };
  NewtonReport rep;
  res.U = constrained_projection(*res.dg, initial, cfg.limiter, cfg.newton,
                                 multipliers, &rep);
  res.dirk.ok = rep.converged;
  if (!rep.converged) res.dirk.message = "projection solve failed";
  res.t_final = built.t_start;
  res.run_min_u = res.dg->point_values(res.U, res.dg->volume_rule().points)
                      .minCoeff();
  if (prob.exact.has_value()) {
    auto [l2, linf] = error_norms(*res.dg, res.U, res.t_final);
    res.l2_error = l2;
    res.linf_error = linf;
  }
  return res;
}

std::vector<ErrorRow> convergence_table(const RunConfig& cfg,
                                        const std::vector<int>& levels) {
  if (levels.empty())
    throw ConfigError("converge.levels must list at least one mesh size");
  std::vector<ErrorRow> rows;
  for (int n : levels) {
    RunConfig c = cfg;
    c.nx = n;
    c.ny = cfg.ny > 0 ? cfg.ny * n / cfg.nx : 0;
    RunResult r = run_experiment(c);
    if (!r.dirk.ok)
      throw std::runtime_error("convergence run failed at n=" +
                               std::to_string(n) + ": " + r.dirk.message);
    if (r.l2_error < 0)
      throw std::runtime_error("convergence study needs a reference solution");
    ErrorRow row;
    row.p = c.degree;
    row.n = n;
    row.h = r.dg->mesh().min_width();
    row.l2 = r.l2_error;
    row.linf = r.linf_error;
    row.min_u = r.run_min_u;
    if (!rows.empty()) {
      const double lh = std::log(rows.back().h / row.h);
      row.l2_order = std::log(rows.back().l2 / row.l2) / lh;
      row.linf_order = std::log(rows.back().linf / row.linf) / lh;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_table(const std::vector<ErrorRow>& rows) {
  std::string out =
      " p      n           L2    order          max    order         min u\n";
  char buf[160];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (i == 0)
      std::snprintf(buf, sizeof(buf), "%2d %6d %12.6e %8s %12.6e %8s %13.6e\n",
                    r.p, r.n, r.l2, "-", r.linf, "-", r.min_u);
    else
      std::snprintf(buf, sizeof(buf),
                    "%2d %6d %12.6e %8.3f %12.6e %8.3f %13.6e\n", r.p, r.n,
                    r.l2, r.l2_order, r.linf, r.linf_order, r.min_u);
    out += buf;
  }
  return out;
}

void write_table_csv(const std::vector<ErrorRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot write");
  out << "p,n,h,l2,l2_order,linf,linf_order,min_u\n";
  for (const auto& r : rows)
    out << r.p << ',' << r.n << ',' << fmt(r.h) << ',' << fmt(r.l2) << ','
        << fmt(r.l2_order) << ',' << fmt(r.linf) << ',' << fmt(r.linf_order)
        << ',' << fmt(r.min_u) << '\n';
}

void write_outputs(const RunResult& result, const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  const auto path = [&](const char* name) {
    return (fs::path(cfg.output_dir) / name).string();
  };
  const int dim = result.dg->mesh().dim;

  {
    std::ofstream out(path("solution.csv"));
    out << (dim == 2 ? "x,y,u,qx,qy\n" : "x,u,q\n");
    const Matrix s = sample_solution(*result.dg, result.U, result.t_final);
    for (int r = 0; r < s.rows(); ++r) {
      for (int c = 0; c < s.cols(); ++c)
        out << (c ? "," : "") << fmt(s(r, c));
      out << '\n';
    }
  }

  {
    std::ofstream out(path("steps.csv"));
    out << "t,dt,cfl,newton_iterations,min_u,max_u,active_multipliers,"
           "conservation\n";
    for (const auto& rec : result.dirk.records)
      out << fmt(rec.t) << ',' << fmt(rec.dt) << ',' << fmt(rec.cfl) << ','
          << rec.newton_iterations << ',' << fmt(rec.min_u) << ','
          << fmt(rec.max_u) << ',' << rec.active_multipliers << ','
          << fmt(rec.conservation) << '\n';
  }

  if (cfg.limiter) {
    std::ofstream out(path("multipliers.csv"));
    out << (dim == 2 ? "element,kind,x,y,lambda\n" : "element,kind,x,lambda\n");
    const Vector& lam = result.dirk.last_multipliers;
    if (lam.size() > 0) {
      ConstraintSet cons = result.dirk.last_constraints;
      if (cons.m() != lam.size()) cons = build_bound_constraints(*result.dg);
      if (cons.m() == lam.size()) {
        for (int j = 0; j < lam.size(); ++j) {
          if (std::abs(lam[j]) <= 1e-10) continue;
          const auto& info = cons.info[j];
          out << info.element << ',' << (info.lower ? "lower" : "upper") << ','
              << fmt(info.x[0]);
          if (dim == 2) out << ',' << fmt(info.x[1]);
          out << ',' << fmt(lam[j]) << '\n';
        }
      }
    }
  }

  if (result.l2_error >= 0) {
    std::ofstream out(path("errors.csv"));
    out << "l2,linf,t_final,steps,rejected,newton_iterations\n";
    out << fmt(result.l2_error) << ',' << fmt(result.linf_error) << ','
        << fmt(result.t_final) << ',' << result.dirk.steps << ','
        << result.dirk.rejected << ',' << result.dirk.total_newton_iterations
        << '\n';
  }
}

} // namespace bpdg
