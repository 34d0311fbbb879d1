// End-to-end acceptance checks for the bound-preserving implicit DG solver.
// Each check covers one shipped claim and prints exactly one line
//   criterion <id>: PASS|FAIL  <label>  (<measurements>)
// so a failing claim is visible in isolation. Run with a list of ids to
// select checks; no arguments runs everything. Exit status is nonzero when
// any selected check fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "bpdg/config.hpp"
#include "bpdg/dirk.hpp"
#include "bpdg/harness.hpp"
#include "bpdg/kkt.hpp"
#include "bpdg/newton.hpp"
#include "bpdg/problem.hpp"

using namespace bpdg;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------- utilities

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

// Observed order for a 2x mesh refinement.
double observed_order(double coarse, double fine) {
  return std::log2(coarse / fine);
}

double records_min(const DirkResult& d) {
  double v = 1e300;
  for (const auto& rec : d.records) v = std::min(v, rec.min_u);
  return v;
}

double records_max(const DirkResult& d) {
  double v = -1e300;
  for (const auto& rec : d.records) v = std::max(v, rec.max_u);
  return v;
}

double state_min(const RunResult& r) {
  return r.dg->point_values(r.U, r.dg->volume_rule().points).minCoeff();
}

double state_max(const RunResult& r) {
  return r.dg->point_values(r.U, r.dg->volume_rule().points).maxCoeff();
}

Mesh mesh_for(const ProblemSpec& pr, int nx, int ny = 1) {
  std::array<int, 2> counts = {nx, pr.dim == 2 ? ny : 1};
  return build_mesh(pr.dim, pr.domain, counts, pr.bc);
}

// Evaluate a 1D discrete solution at one physical point (uniform mesh).
double eval_at(const DgOperator& dg, const Vector& U, double x) {
  const int N = dg.mesh().n_elements();
  const double lo = dg.problem().domain[0][0];
  const double hi = dg.problem().domain[0][1];
  const double h = (hi - lo) / N;
  int K = std::clamp(static_cast<int>((x - lo) / h), 0, N - 1);
  Matrix pt(1, 1);
  pt(0, 0) = 2.0 * (x - lo - K * h) / h - 1.0;
  return dg.point_values(U, pt)(K, 0);
}

// --------------------------------------------- steady accuracy experiments

struct SteadyRun {
  bool ok = false;
  double l2 = -1.0;
  double run_min = 0.0;
  double final_min = 0.0;
};

SteadyRun steady_run(const std::string& name, int p, int N, bool limiter) {
  RunConfig cfg;
  cfg.problem = name;
  cfg.nx = N;
  cfg.degree = p;
  cfg.order = 1;  // backward Euler; only the steady state matters
  cfg.limiter = limiter;
  cfg.newton.eps = 1e-10;
  RunResult r = run_experiment(cfg);
  SteadyRun out;
  out.ok = r.dirk.ok;
  if (!out.ok) return out;
  out.l2 = r.l2_error;
  out.run_min = r.run_min_u;
  out.final_min = state_min(r);
  return out;
}

// Shared driver for the limited steady series: optimal order at the finest
// pair and the floor respected at every constraint point of every step.
bool steady_limited_series(const std::string& name, const std::vector<int>& ps,
                           const std::vector<std::vector<int>>& meshes,
                           double order_tol, std::string& detail) {
  std::ostringstream os;
  bool pass = true;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const int p = ps[k];
    std::vector<double> l2;
    double worst_min = 1e300;
    for (int N : meshes[k]) {
      SteadyRun r = steady_run(name, p, N, true);
      if (!r.ok) {
        os << " p=" << p << ",N=" << N << " diverged;";
        pass = false;
        break;
      }
      l2.push_back(r.l2);
      worst_min = std::min(worst_min, r.run_min);
    }
    if (l2.size() != meshes[k].size()) continue;
    const double ord = observed_order(l2[l2.size() - 2], l2.back());
    os << " p=" << p << ": order=" << num(ord) << " min=" << num(worst_min)
       << ";";
    if (std::abs(ord - (p + 1)) > order_tol) pass = false;
    if (worst_min < 1e-14 - 1e-12) pass = false;
  }
  detail = os.str();
  return pass;
}

bool check_steady_advection_limited(std::string& detail) {
  return steady_limited_series("advection-steady", {1, 2, 3},
                               {{20, 40, 80, 160, 320},
                                {20, 40, 80, 160, 320},
                                {20, 40, 80, 160}},
                               0.1, detail);
}

bool check_steady_advection_unlimited(std::string& detail) {
  std::ostringstream os;
  bool pass = true;
  for (int p = 1; p <= 3; ++p)
    for (int N : {20, 40, 80}) {
      SteadyRun r = steady_run("advection-steady", p, N, false);
      if (!r.ok) {
        os << " p=" << p << ",N=" << N << " diverged;";
        pass = false;
        continue;
      }
      os << " p=" << p << ",N=" << N << ": min=" << num(r.final_min) << ";";
      if (!(r.final_min < 0.0)) pass = false;
    }
  detail = os.str();
  return pass;
}

bool check_steady_burgers_limited(std::string& detail) {
  return steady_limited_series("burgers-steady", {1, 2},
                               {{20, 40, 80, 160}, {20, 40, 80, 160}}, 0.15,
                               detail);
}

// ------------------------------------------- time-dependent 1D advection

bool check_advection_time_dependent(std::string& detail) {
  std::ostringstream os;
  bool pass = true;
  for (int p = 1; p <= 3; ++p) {
    RunConfig cfg;
    cfg.problem = "advection-1d";
    cfg.nx = 100;
    cfg.degree = p;
    cfg.order = p + 1;
    cfg.cfl = 1.0;
    cfg.newton.eps = 1e-12;
    RunResult r = run_experiment(cfg);  // runs to t = 20
    if (!r.dirk.ok) {
      os << " p=" << p << " run failed: " << r.dirk.message << ";";
      pass = false;
      continue;
    }
    const double min_u = r.run_min_u;
    double max_cons = 0.0;
    for (const auto& rec : r.dirk.records)
      max_cons = std::max(max_cons, rec.conservation);

    // After twenty periods the clipped-cosine kinks sit at x = 2.5 and 7.5;
    // active multipliers must stay within three elements of them.
    const double h = 0.1;
    double worst_dist = 0.0;
    int active = 0;
    const Vector& lam = r.dirk.last_multipliers;
    const ConstraintSet& cons = r.dirk.last_constraints;
    for (int j = 0; j < lam.size(); ++j) {
      if (std::abs(lam[j]) <= 1e-10) continue;
      ++active;
      const double x = cons.info[j].x[0];
      worst_dist = std::max(
          worst_dist, std::min(std::abs(x - 2.5), std::abs(x - 7.5)));
    }
    os << " p=" << p << ": min=" << num(min_u) << " cons=" << num(max_cons)
       << " act=" << active << " dist=" << num(worst_dist) << ";";
    if (min_u < 1e-10 - 1e-12) pass = false;
    if (!(max_cons < 1e-12)) pass = false;
    if (worst_dist > 3.0 * h + 1e-9) pass = false;
  }
  detail = os.str();
  return pass;
}

// ---------------------------------------------------- DIRK temporal order

// Scalar decay u' = -u as a zero-flux reaction problem on one element.
DgOperator decay_operator() {
  ProblemSpec p;
  p.name = "decay";
  p.dim = 1;
  p.flux = [](double, double* f) { f[0] = 0.0; };
  p.flux_deriv = [](double, double* f) { f[0] = 0.0; };
  p.has_flux = false;
  p.has_source = true;
  p.source = [](double u, const double*, double) { return u; };
  p.source_deriv = [](double, const double*, double) { return 1.0; };
  p.initial = [](const double*) { return 1.0; };
  p.domain = {{{0.0, 2.0}, {0.0, 0.0}}};
  p.bc = {BcTag::Outflow, BcTag::Outflow};
  p.residual_affine = true;
  return DgOperator(build_mesh(1, p.domain, {1, 1}, p.bc), Basis(1, 0), p);
}

double decay_error(const DgOperator& dg, int order, int n_steps) {
  Vector U(1);
  U[0] = 1.0;
  DirkOptions opt;
  opt.order = order;
  opt.t_start = 0.0;
  opt.t_end = 1.0;
  opt.limiter = false;
  opt.conserve = false;
  opt.fixed_dt = 1.0 / n_steps;
  opt.newton.eps = 1e-13;
  DirkResult res = integrate(dg, U, opt);
  if (!res.ok || res.steps != n_steps) return std::nan("");
  return std::abs(U[0] - std::exp(-1.0));
}

bool check_dirk_orders(std::string& detail) {
  std::ostringstream os;
  bool pass = true;

  for (int order = 1; order <= 4; ++order) {
    const DirkTableau tab = dirk_tableau(order);
    const int s = tab.stages;
    double worst = 0.0;
    auto probe = [&worst](double value, double target) {
      worst = std::max(worst, std::abs(value - target));
    };
    for (int i = 0; i < s; ++i) {
      probe(tab.a.row(i).sum(), tab.c[i]);
      if (!(tab.a(i, i) > 0.0)) worst = 1.0;
      if (tab.b[i] != tab.a(s - 1, i)) worst = 1.0;  // stiff accuracy
    }
    probe(tab.b.sum(), 1.0);
    if (order >= 2) probe(tab.b.dot(tab.c), 0.5);
    if (order >= 3) {
      probe(tab.b.dot(tab.c.cwiseProduct(tab.c)), 1.0 / 3.0);
      probe((tab.b.transpose() * tab.a * tab.c).value(), 1.0 / 6.0);
    }
    if (order >= 4) {
      const Vector c2 = tab.c.cwiseProduct(tab.c);
      probe(tab.b.dot(tab.c.cwiseProduct(c2)), 0.25);
      probe((tab.b.cwiseProduct(tab.c).transpose() * tab.a * tab.c).value(),
            0.125);
      probe((tab.b.transpose() * tab.a * c2).value(), 1.0 / 12.0);
      probe((tab.b.transpose() * tab.a * (tab.a * tab.c)).value(), 1.0 / 24.0);
    }
    if (worst > 1e-12) pass = false;
    os << " cond" << order << "=" << num(worst) << ";";
  }

  const DgOperator dg = decay_operator();
  const int base[5] = {0, 0, 16, 16, 8};
  for (int order = 2; order <= 4; ++order) {
    const double coarse = decay_error(dg, order, base[order]);
    const double fine = decay_error(dg, order, 2 * base[order]);
    if (std::isnan(coarse) || std::isnan(fine)) {
      pass = false;
      os << " order" << order << " run failed;";
      continue;
    }
    const double obs = observed_order(coarse, fine);
    os << " order" << order << "=" << num(obs) << ";";
    if (std::abs(obs - order) > 0.2) pass = false;
  }
  detail = os.str();
  return pass;
}

// ------------------------------------------------ derivative-kernel laws

SpMat sp(const Matrix& M) {
  SpMat S = M.sparseView();
  S.makeCompressed();
  return S;
}

InnerProblem affine_inner(const Matrix& H, const Vector& q,
                          std::vector<int> eq_rows = {}) {
  InnerProblem in;
  in.n = static_cast<int>(H.cols());
  in.residual = [H, q](const Vector& x) { return Vector(H * x + q); };
  in.jacobian = [H](const Vector&) { return sp(H); };
  in.eq_rows = std::move(eq_rows);
  if (!in.eq_rows.empty()) {
    Matrix Dh(in.eq_rows.size(), H.cols());
    for (std::size_t k = 0; k < in.eq_rows.size(); ++k)
      Dh.row(k) = H.row(in.eq_rows[k]);
    in.eq_jacobian = [Dh](const Vector&) { return sp(Dh); };
  }
  return in;
}

ConstraintSet box(const Matrix& A, const Vector& c) {
  ConstraintSet cons;
  cons.A = sp(A);
  cons.c = c;
  return cons;
}

// Dyadic-rational instances: every value is a small integer / 8, so kernel
// arithmetic (and therefore positive homogeneity) is exact in doubles.
struct DyadicGen {
  std::mt19937 rng;
  explicit DyadicGen(unsigned seed) : rng(seed) {}
  double operator()() {
    return std::uniform_int_distribution<int>(-8, 8)(rng) / 8.0;
  }
  Matrix matrix(int r, int c) {
    Matrix M(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) M(i, j) = (*this)();
    return M;
  }
  Vector vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = (*this)();
    return v;
  }
  bool flip() { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; }
};

struct Instance {
  KktSystem sys;
  Vector z;
};

Instance random_instance(DyadicGen& gen, int n, int m, bool with_eq) {
  Matrix H = gen.matrix(n, n);
  Vector q = gen.vector(n);
  std::vector<int> eq = with_eq ? std::vector<int>{0} : std::vector<int>{};
  KktSystem sys(affine_inner(H, q, eq), box(gen.matrix(m, n), gen.vector(m)));
  Vector z = gen.vector(sys.size());
  // Pin about half of the inequality rows exactly on the kink.
  const Vector g = sys.constraints().values(z.head(n));
  for (int j = 0; j < m; ++j)
    if (gen.flip()) z[sys.size() - m + j] = -g[j];
  return {std::move(sys), std::move(z)};
}

bool check_kernel_properties(std::string& detail) {
  std::ostringstream os;
  bool pass = true;

  // (a) descent inequality with <= 1e-12 slack and exact positive
  // homogeneity on 10^4 randomized instances, half of them on the kink.
  DyadicGen gen(20260815);
  const double ts[] = {0.0, 0.5, 1.0, 7.0};
  int hom_failures = 0, descent_failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = 2 + trial % 3;
    const int m = 1 + (trial / 3) % 4;
    Instance inst = random_instance(gen, n, m, trial % 2 == 0);
    const Vector d = gen.vector(inst.sys.size());
    const Vector F = inst.sys.residual(inst.z);

    for (double t : ts) {
      const Vector a1 = inst.sys.directional(inst.z, t * d);
      const Vector b1 = t * inst.sys.directional(inst.z, d);
      const Vector a2 = inst.sys.clarke(inst.z, t * d);
      const Vector b2 = t * inst.sys.clarke(inst.z, d);
      const Vector a3 = inst.sys.quasi_directional(inst.z, t * d, 0.125);
      const Vector b3 = t * inst.sys.quasi_directional(inst.z, d, 0.125);
      if (!(a1.array() == b1.array()).all() ||
          !(a2.array() == b2.array()).all() ||
          !(a3.array() == b3.array()).all())
        ++hom_failures;
    }

    const double one_sided = F.dot(inst.sys.directional(inst.z, d));
    if (one_sided > F.dot(inst.sys.clarke(inst.z, d)) + 1e-12 ||
        one_sided > F.dot(inst.sys.quasi_directional(inst.z, d, 1e-12)) + 1e-12 ||
        one_sided > F.dot(inst.sys.quasi_directional(inst.z, d, 0.25)) + 1e-12)
      ++descent_failures;
  }
  os << " hom_fail=" << hom_failures << " descent_fail=" << descent_failures
     << ";";
  if (hom_failures || descent_failures) pass = false;

  // (b) exact-step identity: when the search equation is solved to machine
  // precision, (F, G(z; d)) = -|F|^2 to 1e-10 relative.
  DyadicGen gen2(99);
  const double delta = 1e-12;
  int solved = 0, identity_failures = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Instance inst = random_instance(gen2, 4, 3, false);
    const Vector F = inst.sys.residual(inst.z);
    if (F.lpNorm<Eigen::Infinity>() < 1e-8) continue;
    Vector d = Vector::Zero(inst.sys.size());
    bool ok = false;
    for (int pass_k = 0; pass_k < 8 && !ok; ++pass_k) {
      Eigen::FullPivLU<Matrix> lu(Matrix(inst.sys.quasi_jacobian(inst.z, d, delta)));
      if (!lu.isInvertible()) break;
      d = lu.solve(-F);
      const Vector Gd = inst.sys.quasi_directional(inst.z, d, delta);
      ok = (Gd + F).lpNorm<Eigen::Infinity>() <=
           1e-12 * (1.0 + F.lpNorm<Eigen::Infinity>());
    }
    if (!ok) continue;
    ++solved;
    const double lhs = F.dot(inst.sys.quasi_directional(inst.z, d, delta));
    if (std::abs(lhs + F.squaredNorm()) > 1e-10 * F.squaredNorm())
      ++identity_failures;
  }
  os << " solved=" << solved << " identity_fail=" << identity_failures << ";";
  if (solved < 200 || identity_failures) pass = false;

  // (c) the one-sided kernel is the limit of forward differences, first
  // order in t, on samples bounded away from the kink.
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int n = 3, m = 2;
  Matrix H(n, n);
  H << 2, 0.5, 0, 0.25, 3, -0.5, 0, 1, 2.5;
  Vector q(n);
  q << -0.5, 0.25, 1.0;
  InnerProblem in;
  in.n = n;
  in.residual = [H, q](const Vector& x) {
    return Vector(H * x + q + 0.1 * x.array().cube().matrix());
  };
  in.jacobian = [H](const Vector& x) {
    Matrix J = H;
    J.diagonal() += 0.3 * x.array().square().matrix();
    return sp(J);
  };
  Matrix A(m, n);
  A << 1, -1, 0.5, 0, 2, -1;
  Vector c(m);
  c << 0.125, -0.25;
  KktSystem sys(std::move(in), box(A, c));

  int fd_samples = 0, fd_failures = 0;
  while (fd_samples < 25) {
    Vector z(sys.size());
    for (int i = 0; i < z.size(); ++i) z[i] = unit(rng);
    const Vector g = sys.constraints().values(z.head(n));
    bool degenerate = false;
    for (int j = 0; j < m; ++j)
      if (std::abs(z[n + j] + g[j]) < 0.05) degenerate = true;
    if (degenerate) continue;
    ++fd_samples;

    Vector d(sys.size());
    for (int i = 0; i < d.size(); ++i) d[i] = unit(rng);
    const Vector F0 = sys.residual(z);
    const Vector Fp = sys.directional(z, d);
    double prev = -1.0;
    bool sample_ok = true;
    for (double t : {1e-2, 1e-3, 1e-4}) {
      const Vector diff = (sys.residual(z + t * d) - F0) / t - Fp;
      const double err = diff.lpNorm<Eigen::Infinity>();
      if (prev >= 0.0 && err > 0.35 * prev + 1e-13) sample_ok = false;
      prev = err;
    }
    if (prev > 1e-3) sample_ok = false;
    if (!sample_ok) ++fd_failures;
  }
  os << " fd_fail=" << fd_failures << ";";
  if (fd_failures) pass = false;

  detail = os.str();
  return pass;
}

// -------------------------------------------------------- oracle agreement

bool check_oracle_equivalence(std::string& detail) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> margin_dist(0.05, 0.6);

  int matched = 0;
  double worst_gap = 0.0;
  bool pass = true;
  std::ostringstream os;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 11;
    const int m = 1 + trial % 12;

    Matrix B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = unit(rng);
    const Matrix H = B.transpose() * B + 0.5 * Matrix::Identity(n, n);

    Vector anchor(n), step(n);
    for (int i = 0; i < n; ++i) anchor[i] = unit(rng);
    for (int i = 0; i < n; ++i) step[i] = unit(rng);
    const Vector y = anchor + 1.2 * step.normalized();

    Matrix A(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = unit(rng);
    Vector c = -(A * anchor);
    for (int j = 0; j < m; ++j) c[j] -= margin_dist(rng);

    // Projection of y onto {g <= 0} under the metric H.
    const Vector q = -(H * y);
    KktSystem sys(affine_inner(H, q), box(A, c));

    NewtonConfig ncfg;
    ncfg.eps = 1e-10;
    // Line-search exhaustion is a documented error signal of the solver, not
    // a wrong answer; callers restart from a better point. Mirror that with
    // a short deterministic restart ladder and verify every fixed point that
    // is reached. Vertex-degenerate draws that never converge are reported
    // and excluded; the pass still demands 50 verified matches.
    Vector z;
    bool converged = false;
    for (int attempt = 0; attempt < 3 && !converged; ++attempt) {
      z = Vector::Zero(sys.size());
      z.head(n) = attempt == 0 ? y : anchor;
      if (attempt == 2) z.tail(m).setOnes();
      NewtonReport rep = semismooth_newton(
          [&sys](const Vector& zz) { return sys.residual(zz); },
          [&sys, &ncfg](const Vector& zz, const Vector& dd) {
            return sys.quasi_jacobian(zz, dd, ncfg.delta);
          },
          z, ncfg);
      converged = rep.converged;
    }
    if (!converged) {
      os << " trial " << trial << " not converged (excluded);";
      continue;
    }

    Vector z_ref;
    try {
      z_ref = oracle_solve_small(sys);
    } catch (const std::exception& e) {
      os << " trial " << trial << " oracle: " << e.what() << ";";
      pass = false;
      continue;
    }

    const double gap = (z - z_ref).lpNorm<Eigen::Infinity>();
    worst_gap = std::max(worst_gap, gap);
    const Vector g = sys.constraints().values(z.head(n));
    const Vector lam = z.tail(m);
    const bool kkt_ok = g.maxCoeff() <= 1e-10 && lam.minCoeff() >= -1e-10 &&
                        std::abs(g.dot(lam)) <= 1e-10;
    if (gap > 1e-8 || !kkt_ok) {
      os << " trial " << trial << " gap=" << num(gap) << ";";
      pass = false;
      continue;
    }
    ++matched;
  }
  os << " matched=" << matched << "/60 worst_gap=" << num(worst_gap) << ";";
  if (matched < 50) pass = false;
  detail = os.str();
  return pass;
}

// ------------------------------------------------------- Allen-Cahn front

// First downward crossing of u = 1/2, sampled inside every element.
double front_position(const DgOperator& dg, const Vector& U) {
  const int np = 12;
  Matrix pts(np, 1);
  for (int k = 0; k < np; ++k) pts(k, 0) = -1.0 + 2.0 * (k + 0.5) / np;
  const Matrix vals = dg.point_values(U, pts);
  double prev_x = 0.0, prev_u = 0.0;
  bool have_prev = false;
  for (int K = 0; K < dg.mesh().n_elements(); ++K)
    for (int qp = 0; qp < np; ++qp) {
      double xi[2] = {pts(qp, 0), 0.0};
      double x[2];
      dg.map_to_physical(K, xi, x);
      const double u = vals(K, qp);
      if (have_prev && prev_u >= 0.5 && u < 0.5)
        return prev_x + (0.5 - prev_u) * (x[0] - prev_x) / (u - prev_u);
      prev_x = x[0];
      prev_u = u;
      have_prev = true;
    }
  return std::nan("");
}

bool check_allen_cahn_front(std::string& detail) {
  const double nu_bar = 1e-5;
  ProblemSpec prob = make_problem("allen-cahn-1d", {{"nu_bar", nu_bar}});
  DgOperator dg(mesh_for(prob, 100), Basis(1, 3), prob);

  // The bound gates allow only 1e-12 slack, so every stage has to resolve
  // the constraint rows below that scale.
  NewtonConfig ncfg;
  ncfg.eps = 1e-12;
  auto initial = [&prob](const double* x) { return prob.initial(x); };
  Vector U = constrained_projection(dg, initial, true, ncfg);

  double min_u = dg.point_values(U, dg.volume_rule().points).minCoeff();
  double max_u = dg.point_values(U, dg.volume_rule().points).maxCoeff();

  std::vector<double> ts, fronts;
  double t = 0.0;
  bool ok = true;
  std::string message;
  while (t < 50.0 - 1e-9) {
    DirkOptions opt;
    opt.order = 4;
    opt.t_start = t;
    opt.t_end = std::min(50.0, t + 2.0);
    opt.limiter = true;
    opt.conserve = true;
    opt.newton = ncfg;
    DirkResult res = integrate(dg, U, opt);
    if (!res.ok) {
      ok = false;
      message = res.message;
      break;
    }
    min_u = std::min(min_u, records_min(res));
    max_u = std::max(max_u, records_max(res));
    t = res.t_final;
    ts.push_back(t);
    fronts.push_back(front_position(dg, U));
  }

  std::ostringstream os;
  if (!ok) {
    detail = " integration failed: " + message;
    return false;
  }

  // Least-squares slope of the front path, skipping the settling phase.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    if (ts[k] < 10.0 || std::isnan(fronts[k])) continue;
    sx += ts[k];
    sy += fronts[k];
    sxx += ts[k] * ts[k];
    sxy += ts[k] * fronts[k];
    ++cnt;
  }
  const double slope =
      cnt >= 2 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : std::nan("");
  const double s_exact = 3.0 * std::sqrt(nu_bar / 2.0);

  bool pass = true;
  os << " min=" << num(min_u) << " max-1=" << num(max_u - 1.0)
     << " speed=" << num(slope) << " target=" << num(s_exact) << ";";
  if (min_u < 1e-14 - 1e-12) pass = false;
  if (max_u > 1.0 - 1e-10 + 1e-12) pass = false;
  if (!(std::abs(slope - s_exact) <= 0.05 * s_exact)) pass = false;
  detail = os.str();
  return pass;
}

// ------------------------------------------------------- Barenblatt decay

RunConfig barenblatt_config(int N, bool limiter) {
  RunConfig cfg;
  cfg.problem = "barenblatt-1d";
  cfg.params["m"] = 8.0;
  cfg.params["C"] = 1.0;
  cfg.nx = N;
  cfg.degree = 3;
  cfg.order = 2;
  cfg.limiter = limiter;
  if (limiter) cfg.newton.eps = 1e-12;  // floor gate allows 1e-12 slack
  return cfg;
}

bool check_barenblatt(std::string& detail) {
  std::ostringstream os;
  bool pass = true;

  // Without the limiter the numerical solution dips visibly negative near
  // the moving support boundary (and the run may abort there).
  {
    RunConfig cfg = barenblatt_config(100, false);
    RunResult r = run_experiment(cfg);
    const Matrix vals = r.dg->point_values(r.U, r.dg->volume_rule().points);
    int Kmin = 0, qmin = 0;
    for (int K = 0; K < vals.rows(); ++K)
      for (int qp = 0; qp < vals.cols(); ++qp)
        if (vals(K, qp) < vals(Kmin, qmin)) Kmin = K, qmin = qp;
    const double dip =
        std::min(r.dirk.records.empty() ? 1e300 : records_min(r.dirk),
                 vals(Kmin, qmin));
    double xi[2] = {r.dg->volume_rule().points(qmin, 0), 0.0};
    double x[2];
    r.dg->map_to_physical(Kmin, xi, x);
    const double dip_x = std::abs(x[0]);
    os << " raw: dip=" << num(dip) << " at |x|=" << num(dip_x)
       << (r.dirk.ok ? "" : " (aborted)") << ";";
    if (!(dip < -1e-4)) pass = false;
  }

  // With the limiter the floor holds and the profile converges uniformly.
  double prev_linf = -1.0;
  for (int N : {50, 100, 200}) {
    RunConfig cfg = barenblatt_config(N, true);
    RunResult r = run_experiment(cfg);
    if (!r.dirk.ok) {
      os << " N=" << N << " failed;";
      pass = false;
      continue;
    }
    os << " N=" << N << ": min=" << num(r.run_min_u)
       << " linf=" << num(r.linf_error) << ";";
    if (N == 100 && r.run_min_u < 1e-10 - 1e-12) pass = false;
    if (prev_linf >= 0.0 && !(r.linf_error < prev_linf)) pass = false;
    prev_linf = r.linf_error;
  }
  detail = os.str();
  return pass;
}

// -------------------------------------------------- Buckley-Leverett pair

// Element-wise quadrature of |u_c - u_f| over [0, 1] with the operands on
// different (nested) meshes.
double l1_distance(const DgOperator& dgc, const Vector& Uc,
                   const std::function<double(double)>& other) {
  QuadratureRule rule = quadrature_1d(QuadFamily::GaussLegendre, 6);
  Matrix pts(rule.n(), 1);
  for (int qp = 0; qp < rule.n(); ++qp) pts(qp, 0) = rule.points(qp, 0);
  const Matrix vals = dgc.point_values(Uc, pts);
  const int N = dgc.mesh().n_elements();
  const double h = 1.0 / N;
  double acc = 0.0;
  for (int K = 0; K < N; ++K)
    for (int qp = 0; qp < rule.n(); ++qp) {
      double xi[2] = {pts(qp, 0), 0.0};
      double x[2];
      dgc.map_to_physical(K, xi, x);
      acc += rule.weights[qp] * (h / 2.0) * std::abs(vals(K, qp) - other(x[0]));
    }
  return acc;
}

bool check_buckley_leverett(std::string& detail) {
  std::ostringstream os;
  bool pass = true;
  for (bool gravity : {false, true}) {
    const std::string name =
        gravity ? "buckley-leverett-gravity" : "buckley-leverett";
    RunResult runs[2];
    bool ok = true;
    const int meshes[2] = {100, 200};
    for (int k = 0; k < 2; ++k) {
      RunConfig cfg;
      cfg.problem = name;
      cfg.params["nu_bar"] = 0.01;
      if (gravity) cfg.params["mesh_h"] = 1.0 / meshes[k];
      cfg.nx = meshes[k];
      cfg.degree = 3;
      cfg.order = 4;
      cfg.newton.eps = 1e-12;  // bound gates allow 1e-12 slack
      runs[k] = run_experiment(cfg);  // runs to t = 0.2
      if (!runs[k].dirk.ok) {
        os << " " << name << " N=" << meshes[k]
           << " failed: " << runs[k].dirk.message << ";";
        ok = false;
        continue;
      }
      const double lo = std::min(runs[k].run_min_u, records_min(runs[k].dirk));
      const double hi = std::max(state_max(runs[k]), records_max(runs[k].dirk));
      os << (gravity ? " grav" : " flat") << meshes[k] << ": min=" << num(lo)
         << " max-1=" << num(hi - 1.0) << ";";
      if (lo < 1e-10 - 1e-12 || hi > 1.0 - 1e-10 + 1e-12) pass = false;
    }
    if (!ok) {
      pass = false;
      continue;
    }

    const DgOperator& coarse = *runs[0].dg;
    const DgOperator& fine_dg = *runs[1].dg;
    const Vector& Uf = runs[1].U;
    const double d_cf = l1_distance(coarse, runs[0].U, [&](double x) {
      return eval_at(fine_dg, Uf, x);
    });
    const auto& init = coarse.problem().initial;
    const double d_ci = l1_distance(coarse, runs[0].U, [&](double x) {
      return init(&x);
    });
    os << " d(c,f)=" << num(d_cf) << " d(c,0)=" << num(d_ci) << ";";
    if (!(10.0 * d_cf <= d_ci)) pass = false;
  }
  detail = os.str();
  return pass;
}

// ---------------------------------------------------- limiter neutrality

// Smooth periodic advection whose solution stays strictly inside the
// bounds, so the limiter must not perturb anything.
ProblemSpec interior_advection() {
  ProblemSpec p;
  p.name = "interior-advection";
  p.dim = 1;
  p.flux = [](double u, double* f) { f[0] = u; };
  p.flux_deriv = [](double, double* f) { f[0] = 1.0; };
  p.initial = [](const double* x) {
    return 2.0 + std::sin(2.0 * kPi * x[0] / 10.0);
  };
  p.u_min = 1e-10;
  p.u_max = 5.0;
  p.domain = {{{0.0, 10.0}, {0.0, 0.0}}};
  p.bc = {BcTag::Periodic, BcTag::Periodic};
  p.residual_affine = true;
  p.cfl_cap = 1.0;
  p.t_end_default = 1.0;
  return p;
}

bool check_limiter_neutrality(std::string& detail) {
  ProblemSpec prob = interior_advection();
  DgOperator dg(mesh_for(prob, 20), Basis(1, 2), prob);
  NewtonConfig ncfg;
  ncfg.eps = 1e-12;
  auto initial = [&prob](const double* x) { return prob.initial(x); };

  Vector U[2];
  DirkResult res[2];
  int worst_active = 0;
  for (int k = 0; k < 2; ++k) {
    const bool limiter = k == 1;
    U[k] = constrained_projection(dg, initial, limiter, ncfg);
    DirkOptions opt;
    opt.order = 3;
    opt.t_start = 0.0;
    opt.t_end = 0.5;
    opt.fixed_dt = 0.05;
    opt.limiter = limiter;
    opt.conserve = false;
    opt.newton = ncfg;
    res[k] = integrate(dg, U[k], opt);
    if (!res[k].ok) {
      detail = " run failed: " + res[k].message;
      return false;
    }
    for (const auto& rec : res[k].records)
      worst_active = std::max(worst_active, rec.active_multipliers);
  }

  const double gap = (U[0] - U[1]).lpNorm<Eigen::Infinity>();
  const double lam_max = res[1].last_multipliers.size() > 0
                             ? res[1].last_multipliers.cwiseAbs().maxCoeff()
                             : 0.0;
  std::ostringstream os;
  os << " state_gap=" << num(gap) << " active=" << worst_active
     << " lam_max=" << num(lam_max) << ";";
  detail = os.str();
  return res[0].steps == res[1].steps && gap <= 1e-10 && worst_active == 0 &&
         lam_max <= 1e-12;
}

// ------------------------------------------------------------------ main

struct Check {
  int id;
  const char* label;
  bool (*fn)(std::string&);
};

const Check kChecks[] = {
    {1, "steady advection, limiter on: optimal orders, floor respected",
     check_steady_advection_limited},
    {2, "steady advection, limiter off: negative undershoots",
     check_steady_advection_unlimited},
    {3, "steady Burgers, limiter on: optimal orders, floor respected",
     check_steady_burgers_limited},
    {4, "unsteady advection: bounds, multiplier locality, conservation",
     check_advection_time_dependent},
    {5, "time integrator: order conditions and observed temporal orders",
     check_dirk_orders},
    {6, "derivative kernels: descent, homogeneity, exact step, FD limit",
     check_kernel_properties},
    {7, "semi-smooth Newton agrees with the enumeration oracle",
     check_oracle_equivalence},
    {8, "Allen-Cahn: bounds and traveling-front speed",
     check_allen_cahn_front},
    {9, "Barenblatt: unlimited undershoot, limited floor, uniform convergence",
     check_barenblatt},
    {10, "Buckley-Leverett: bounds and mesh-pair agreement",
     check_buckley_leverett},
    {11, "limiter neutrality on a strictly interior solution",
     check_limiter_neutrality},
};

} // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) {
    try {
      wanted.push_back(std::stoi(argv[i]));
    } catch (const std::exception&) {
      std::fprintf(stderr, "usage: %s [criterion-id ...]\n", argv[0]);
      return 2;
    }
  }

  bool all_ok = true;
  for (const Check& check : kChecks) {
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), check.id) == wanted.end())
      continue;
    std::string detail;
    bool ok = false;
    try {
      ok = check.fn(detail);
    } catch (const std::exception& e) {
      detail = std::string(" exception: ") + e.what();
    }
    std::printf("criterion %2d: %s  %s (%s)\n", check.id, ok ? "PASS" : "FAIL",
                check.label, detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
