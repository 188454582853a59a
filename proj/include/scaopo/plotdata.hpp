// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace scaopo {

/// Long-format plot rows: series, iteration, env_steps, value, lo, hi.
struct PlotRow {
  std::string series;
  long long iteration = 0;
  long long env_steps = 0;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Aggregate curve columns parsed from a <tag>_aggregate.csv.
struct AggregateCurve {
  std::vector<long long> iteration;
  std::vector<long long> env_steps;
  std::vector<std::vector<double>> mean;  // [cost][row]
  std::vector<std::vector<double>> std;
};

/// Throws ConfigError naming the file and row on schema or number errors.
AggregateCurve read_aggregate_csv(const std::filesystem::path& path);

/// Writes cost_<i>.csv per cost function into out_dir from each run directory's
/// aggregate curve (series named by tag), plus "baseline" rows from the
/// equal-power comparison and "limit" rows for constraints when present in
/// summary.json. Returns the written file paths.
std::vector<std::filesystem::path> emit_plotdata(const std::vector<std::filesystem::path>& run_dirs,
                                                 const std::filesystem::path& out_dir);

std::vector<PlotRow> read_plot_csv(const std::filesystem::path& path);

}  // namespace scaopo
