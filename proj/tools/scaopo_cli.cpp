// SPDX-License-Identifier: Apache-2.0
// scaopo: run, validate and post-process experiments.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scaopo/error.hpp"
#include "scaopo/experiment.hpp"
#include "scaopo/kernels.hpp"
#include "scaopo/plotdata.hpp"
#include "scaopo/run_config.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

int cmd_validate(const std::string& path) {
  const scaopo::RunConfig cfg = scaopo::load_config(path);
  std::cout << path << ": ok (" << scaopo::env_kind_name(cfg.env.kind) << ", "
            << scaopo::variant_tag(cfg.driver.variant) << ", " << cfg.run.iterations << " iterations, "
            << cfg.run.seeds.size() << " seeds)\n";
  return 0;
}

int cmd_run(const std::string& path) {
  const scaopo::RunConfig cfg = scaopo::load_config(path);
  std::cerr << "kernels: " << scaopo::kernels::isa_name(scaopo::kernels::active_isa()) << "\n";
  const scaopo::ExperimentResult res = scaopo::run_experiment(cfg);
  for (const scaopo::SeedResult& s : res.seeds) {
    std::cout << res.tag << " seed " << s.seed << ": " << s.log.size() << " iterations";
    if (s.final_costs.size()) {
      std::cout << ", final costs";
      for (Eigen::Index i = 0; i < s.final_costs.size(); ++i) std::cout << ' ' << s.final_costs[i];
      std::cout << (s.feasible ? " (feasible)" : " (infeasible)");
    }
    if (!s.error.empty()) std::cout << ", error: " << s.error;
    std::cout << '\n';
  }
  for (const scaopo::BaselineResult& b : res.baseline)
    std::cout << "baseline seed " << b.seed << ": total power " << b.p_total << (b.met ? "" : " (limits not met)")
              << '\n';
  std::cout << "outputs in " << res.out_dir.string() << '\n';
  return res.ok ? 0 : kExitRuntime;
}

int cmd_plotdata(const std::vector<std::string>& dirs, std::string out) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  if (out.empty()) {
    std::filesystem::path first = std::filesystem::path(dirs.front()).lexically_normal();
    if (!first.has_filename()) first = first.parent_path();
    out = (first.parent_path() / (first.filename().string() + "-plot")).string();
  }
  for (const auto& p : scaopo::emit_plotdata(paths, out)) std::cout << p.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained off-policy optimization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run an experiment and write its metrics");
  run->add_option("config", config_path, "Config file (JSON)")->required();

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", validate_path, "Config file (JSON)")->required();

  std::vector<std::string> dirs;
  std::string out;
  CLI::App* plot = app.add_subcommand("plotdata", "Convert run directories into long-format plot files");
  plot->add_option("dirs", dirs, "Run output directories")->required();
  plot->add_option("--out", out, "Destination directory (default: <first dir>-plot)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path);
    if (*validate) return cmd_validate(validate_path);
    return cmd_plotdata(dirs, out);
  } catch (const scaopo::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
