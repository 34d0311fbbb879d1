#pragma once

#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpdg/newton.hpp"

namespace bpdg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// INI-style text: [section] headers, key = value lines, '#'/';' comments.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text,
                                 const std::string& origin = "<config>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  int get_int(const std::string& section, const std::string& key,
              int fallback) const;
  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const;

  const std::map<std::string, std::string>& section(const std::string& name) const;
  std::vector<std::string> section_names() const;
  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> data_;
  std::string origin_;
};

struct RunConfig {
  std::string problem;
  std::map<std::string, double> params;

  int nx = 0;
  int ny = 0;  // defaults to nx for 2d problems
  int degree = 1;

  int order = 2;
  double t_start = std::numeric_limits<double>::quiet_NaN();  // problem default
  double t_end = std::numeric_limits<double>::quiet_NaN();    // problem default
  double cfl = 0.0;
  double fixed_dt = 0.0;
  int max_steps = 200000;

  bool limiter = true;
  int conserve = -1;  // -1: on for 1d problems, off for 2d
  bool mu_curvature = true;
  bool scope_near = false;
  double scope_margin = 0.1;
  double upwind_alpha = 1.0;

  NewtonConfig newton;

  std::string output_dir = "out";
  std::string format = "csv";  // csv or table
  int seed = 0;                // consumed by randomized utilities only
  std::vector<int> levels;     // mesh series for convergence studies
};

// Validates section and key names and value ranges; throws ConfigError with
// the offending "section.key" in the message.
RunConfig parse_run_config(const ConfigFile& file);

} // namespace bpdg
