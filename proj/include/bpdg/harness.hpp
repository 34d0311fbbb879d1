#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "bpdg/config.hpp"
#include "bpdg/dirk.hpp"
#include "bpdg/ldg.hpp"

namespace bpdg {

struct ErrorRow {
  int p = 0;
  int n = 0;
  double h = 0.0;
  double l2 = 0.0;
  double l2_order = 0.0;  // 0 in the first row
  double linf = 0.0;
  double linf_order = 0.0;
  double min_u = 0.0;  // over constraint points and accepted steps
};

struct RunResult {
  std::shared_ptr<DgOperator> dg;
  Vector U;
  DirkResult dirk;
  double t_final = 0.0;
  double l2_error = -1.0;   // -1 when the problem has no reference solution
  double linf_error = -1.0;
  double run_min_u = 0.0;   // over all accepted steps, at constraint points
};

// Discrete L2 and max errors against the problem's reference solution.
std::pair<double, double> error_norms(const DgOperator& dg, const Vector& U,
                                      double t);

// Equispaced per-element sample of the broken solution: columns are
// x (, y), u, then the reconstructed gradient components; elements
// contribute 4(degree+1) points per axis.
Matrix sample_solution(const DgOperator& dg, const Vector& U, double t);

RunResult run_experiment(const RunConfig& cfg);

// Initial-data projection only.
RunResult project_experiment(const RunConfig& cfg, Vector* multipliers = nullptr);

std::vector<ErrorRow> convergence_table(const RunConfig& cfg,
                                        const std::vector<int>& levels);
std::string format_table(const std::vector<ErrorRow>& rows);

// CSV artifacts under cfg.output_dir: solution.csv, steps.csv,
// multipliers.csv and, when a reference solution exists, errors.csv.
void write_outputs(const RunResult& result, const RunConfig& cfg);
void write_table_csv(const std::vector<ErrorRow>& rows, const std::string& path);

} // namespace bpdg
