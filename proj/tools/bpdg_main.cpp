#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpdg/config.hpp"
#include "bpdg/harness.hpp"

namespace {

struct Overrides {
  std::string output_dir;
  std::string limiter;  // "", "on" or "off"
  std::string format;
  std::optional<int> order;
  std::optional<int> elements;
  std::optional<int> degree;
  std::optional<double> t_end;
  std::optional<int> seed;
  std::string levels;
};

void add_common(CLI::App* cmd, std::string& config_path, Overrides& ov) {
  cmd->add_option("config", config_path, "configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--output-dir", ov.output_dir, "directory for CSV artifacts");
  cmd->add_option("--limiter", ov.limiter, "override limiter.enabled")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--format", ov.format, "stdout rendering of summaries")
      ->check(CLI::IsMember({"csv", "table"}));
  cmd->add_option("--order", ov.order, "override time.order");
  cmd->add_option("--elements", ov.elements, "override mesh.elements");
  cmd->add_option("--degree", ov.degree, "override mesh.degree");
  cmd->add_option("--t-end", ov.t_end, "override time.t_end");
  cmd->add_option("--seed", ov.seed,
                  "seed for randomized utilities; the solver itself is "
                  "deterministic");
}

bpdg::RunConfig load(const std::string& path, const Overrides& ov) {
  bpdg::RunConfig cfg = bpdg::parse_run_config(bpdg::ConfigFile::parse_file(path));
  if (!ov.output_dir.empty()) cfg.output_dir = ov.output_dir;
  if (ov.limiter == "on") cfg.limiter = true;
  if (ov.limiter == "off") cfg.limiter = false;
  if (!ov.format.empty()) cfg.format = ov.format;
  if (ov.order) cfg.order = *ov.order;
  if (ov.elements) cfg.nx = *ov.elements;
  if (ov.degree) cfg.degree = *ov.degree;
  if (ov.t_end) cfg.t_end = *ov.t_end;
  if (ov.seed) cfg.seed = *ov.seed;
  return cfg;
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string tok = text.substr(pos, comma - pos);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"implicit discontinuous Galerkin solver with pointwise bounds"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;

  CLI::App* cmd_run = app.add_subcommand("run", "integrate one configuration");
  add_common(cmd_run, config_path, ov);

  CLI::App* cmd_conv =
      app.add_subcommand("converge", "run a mesh series and report orders");
  add_common(cmd_conv, config_path, ov);
  cmd_conv->add_option("--levels", ov.levels, "comma-separated mesh sizes");

  CLI::App* cmd_proj =
      app.add_subcommand("project", "project the initial data only");
  add_common(cmd_proj, config_path, ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const bpdg::RunConfig cfg = load(config_path, ov);

    if (cmd_run->parsed()) {
      bpdg::RunResult res = bpdg::run_experiment(cfg);
      if (!res.dirk.ok) {
        std::cerr << "run failed: " << res.dirk.message << "\n";
        return 3;
      }
      bpdg::write_outputs(res, cfg);
      std::cout << "t_final=" << res.t_final << " steps=" << res.dirk.steps
                << " rejected=" << res.dirk.rejected
                << " min_u=" << res.run_min_u;
      if (res.l2_error >= 0)
        std::cout << " l2=" << res.l2_error << " max=" << res.linf_error;
      std::cout << "\n";
      return 0;
    }

    if (cmd_conv->parsed()) {
      std::vector<int> levels =
          ov.levels.empty() ? cfg.levels : parse_levels(ov.levels);
      const auto rows = bpdg::convergence_table(cfg, levels);
      std::filesystem::create_directories(cfg.output_dir);
      const auto csv_path =
          (std::filesystem::path(cfg.output_dir) / "table.csv").string();
      bpdg::write_table_csv(rows, csv_path);
      if (cfg.format == "table") {
        std::cout << bpdg::format_table(rows);
      } else {
        std::ifstream written(csv_path);
        std::cout << written.rdbuf();
      }
      return 0;
    }

    // project
    bpdg::Vector multipliers;
    bpdg::RunResult res = bpdg::project_experiment(cfg, &multipliers);
    if (!res.dirk.ok) {
      std::cerr << "projection failed\n";
      return 3;
    }
    res.dirk.last_multipliers = multipliers;
    bpdg::write_outputs(res, cfg);
    std::cout << "projected min_u=" << res.run_min_u;
    if (res.l2_error >= 0) std::cout << " l2=" << res.l2_error;
    std::cout << "\n";
    return 0;
  } catch (const bpdg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
