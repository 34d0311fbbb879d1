#include "bpdg/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace bpdg {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
  for (std::size_t i = 0; i < line.size(); ++i)
    if (line[i] == '#' || line[i] == ';') return line.substr(0, i);
  return line;
}

} // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text,
                                    const std::string& origin) {
  ConfigFile cf;
  cf.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": empty section name");
      cf.data_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": key outside any [section]");
    auto& sec = cf.data_[section];
    if (sec.count(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": duplicate key '" + key + "' in [" + section + "]");
    sec[key] = value;
  }
  return cf;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  auto it = data_.find(section);
  return it != data_.end() && it->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key,
                                   const std::string& fallback) const {
  auto it = data_.find(section);
  if (it == data_.end()) return fallback;
  auto jt = it->second.find(key);
  return jt == it->second.end() ? fallback : jt->second;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key, "");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(origin_ + ": " + section + "." + key +
                      ": expected a number, got '" + v + "'");
  return x;
}

int ConfigFile::get_int(const std::string& section, const std::string& key,
                        int fallback) const {
  if (!has(section, key)) return fallback;
  const double x = get_double(section, key, 0.0);
  const int i = static_cast<int>(x);
  if (static_cast<double>(i) != x)
    throw ConfigError(origin_ + ": " + section + "." + key +
                      ": expected an integer");
  return i;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  if (!has(section, key)) return fallback;
  std::string v = get_string(section, key, "");
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "on" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "off" || v == "no" || v == "0") return false;
  throw ConfigError(origin_ + ": " + section + "." + key +
                    ": expected a boolean, got '" + v + "'");
}

const std::map<std::string, std::string>& ConfigFile::section(
    const std::string& name) const {
  static const std::map<std::string, std::string> empty;
  auto it = data_.find(name);
  return it == data_.end() ? empty : it->second;
}

std::vector<std::string> ConfigFile::section_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : data_) out.push_back(name);
  return out;
}

namespace {

void check_keys(const ConfigFile& f, const std::string& section,
                const std::set<std::string>& allowed) {
  for (const auto& [key, _] : f.section(section))
    if (!allowed.count(key))
      throw ConfigError(f.origin() + ": unknown key " + section + "." + key);
}

} // namespace

RunConfig parse_run_config(const ConfigFile& f) {
  static const std::set<std::string> known_sections = {
      "problem", "mesh", "time", "limiter", "newton", "output", "converge"};
  for (const auto& name : f.section_names())
    if (!known_sections.count(name))
      throw ConfigError(f.origin() + ": unknown section [" + name + "]");

  RunConfig cfg;

  cfg.problem = f.get_string("problem", "name", "");
  if (cfg.problem.empty())
    throw ConfigError(f.origin() + ": problem.name is required");
  for (const auto& [key, value] : f.section("problem")) {
    if (key == "name") continue;
    cfg.params[key] = f.get_double("problem", key, 0.0);
    (void)value;
  }

  check_keys(f, "mesh", {"elements", "nx", "ny", "degree"});
  if (f.has("mesh", "elements") && f.has("mesh", "nx"))
    throw ConfigError(f.origin() + ": give mesh.elements or mesh.nx, not both");
  cfg.nx = f.get_int("mesh", "elements", f.get_int("mesh", "nx", 0));
  cfg.ny = f.get_int("mesh", "ny", 0);
  cfg.degree = f.get_int("mesh", "degree", 1);
  if (cfg.nx <= 0)
    throw ConfigError(f.origin() + ": mesh.elements must be positive");
  if (cfg.ny < 0) throw ConfigError(f.origin() + ": mesh.ny must be positive");
  if (cfg.degree < 0 || cfg.degree > 3)
    throw ConfigError(f.origin() + ": mesh.degree must be in 0..3");

  check_keys(f, "time",
             {"order", "t_start", "t_end", "cfl", "fixed_dt", "max_steps"});
  cfg.order = f.get_int("time", "order", 2);
  if (cfg.order < 1 || cfg.order > 4)
    throw ConfigError(f.origin() + ": time.order must be in 1..4");
  cfg.t_start = f.get_double("time", "t_start", cfg.t_start);
  cfg.t_end = f.get_double("time", "t_end", cfg.t_end);
  cfg.cfl = f.get_double("time", "cfl", 0.0);
  if (cfg.cfl < 0) throw ConfigError(f.origin() + ": time.cfl must be >= 0");
  cfg.fixed_dt = f.get_double("time", "fixed_dt", 0.0);
  if (cfg.fixed_dt < 0)
    throw ConfigError(f.origin() + ": time.fixed_dt must be >= 0");
  cfg.max_steps = f.get_int("time", "max_steps", cfg.max_steps);
  if (cfg.max_steps <= 0)
    throw ConfigError(f.origin() + ": time.max_steps must be positive");

  check_keys(f, "limiter",
             {"enabled", "conserve", "scope", "scope_margin", "upwind_alpha"});
  cfg.limiter = f.get_bool("limiter", "enabled", true);
  if (f.has("limiter", "conserve"))
    cfg.conserve = f.get_bool("limiter", "conserve", true) ? 1 : 0;
  const std::string scope = f.get_string("limiter", "scope", "all");
  if (scope == "near")
    cfg.scope_near = true;
  else if (scope != "all")
    throw ConfigError(f.origin() + ": limiter.scope must be all or near");
  cfg.scope_margin = f.get_double("limiter", "scope_margin", cfg.scope_margin);
  if (cfg.scope_margin <= 0 || cfg.scope_margin > 1)
    throw ConfigError(f.origin() + ": limiter.scope_margin must be in (0,1]");
  cfg.upwind_alpha = f.get_double("limiter", "upwind_alpha", 1.0);
  if (cfg.upwind_alpha < 0.0 || cfg.upwind_alpha > 1.0)
    throw ConfigError(f.origin() + ": limiter.upwind_alpha must be in [0,1]");

  check_keys(f, "newton",
             {"eps", "delta", "max_iterations", "scale_variables",
              "equilibrate", "curvature", "dense_threshold"});
  cfg.mu_curvature = f.get_bool("newton", "curvature", cfg.mu_curvature);
  cfg.newton.eps = f.get_double("newton", "eps", cfg.newton.eps);
  if (cfg.newton.eps <= 0)
    throw ConfigError(f.origin() + ": newton.eps must be positive");
  cfg.newton.delta = f.get_double("newton", "delta", cfg.newton.delta);
  cfg.newton.max_iterations =
      f.get_int("newton", "max_iterations", cfg.newton.max_iterations);
  cfg.newton.scale_variables =
      f.get_bool("newton", "scale_variables", cfg.newton.scale_variables);
  cfg.newton.equilibrate =
      f.get_bool("newton", "equilibrate", cfg.newton.equilibrate);
  cfg.newton.dense_threshold =
      f.get_int("newton", "dense_threshold", cfg.newton.dense_threshold);

  check_keys(f, "output", {"dir", "format", "seed"});
  cfg.output_dir = f.get_string("output", "dir", cfg.output_dir);
  cfg.format = f.get_string("output", "format", cfg.format);
  if (cfg.format != "csv" && cfg.format != "table")
    throw ConfigError(f.origin() + ": output.format must be csv or table");
  cfg.seed = f.get_int("output", "seed", cfg.seed);

  check_keys(f, "converge", {"levels"});
  const std::string levels = f.get_string("converge", "levels", "");
  if (!levels.empty()) {
    std::istringstream ls(levels);
    std::string tok;
    while (std::getline(ls, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      char* end = nullptr;
      const long v = std::strtol(tok.c_str(), &end, 10);
      if (end == tok.c_str() || *end != '\0' || v <= 0)
        throw ConfigError(f.origin() + ": converge.levels: bad entry '" + tok + "'");
      cfg.levels.push_back(static_cast<int>(v));
    }
    for (std::size_t i = 1; i < cfg.levels.size(); ++i)
      if (cfg.levels[i] <= cfg.levels[i - 1])
        throw ConfigError(f.origin() +
                          ": converge.levels must be strictly increasing");
  }
  return cfg;
}

} // namespace bpdg
