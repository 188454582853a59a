// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "scaopo/driver.hpp"
#include "scaopo/mimo_env.hpp"
#include "scaopo/run_config.hpp"

namespace scaopo {

/// Outcome of one seed (the selected restart when several were run).
struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t restart = 0;
  std::vector<IterationRecord> log;
  Eigen::VectorXd limits;       // c_1..c_m of this seed's environment instance
  Eigen::VectorXd final_costs;  // C_0..C_m averaged over the final window of iterations
  bool feasible = false;        // final constraint averages within the limits
  double feasible_update_fraction = 0.0;  // share of feasible updates in the final window
  std::string error;            // non-empty when the run aborted
};

/// Smallest equal total power whose delays meet every limit.
struct BaselineResult {
  std::uint64_t seed = 0;
  double p_total = 0.0;
  Eigen::VectorXd costs;  // C_0..C_K averaged over the simulated horizon
  bool met = false;       // false if even K * p_max misses a limit
};

struct ExperimentResult {
  std::filesystem::path out_dir;
  std::string tag;
  std::vector<SeedResult> seeds;
  std::vector<BaselineResult> baseline;
  bool ok = true;
};

/// Mean of running_costs over the last ceil(fraction * n) records.
Eigen::VectorXd final_window_average(const std::vector<IterationRecord>& log, double fraction);

/// Runs every restart of one seed and keeps the best: feasible runs first,
/// then the lowest objective; among infeasible runs the smallest violation.
SeedResult run_seed(const RunConfig& config, std::uint64_t seed);

/// Long-run costs of the equal-power RZF policy on the environment instance of
/// `seed`, driven by the same environment random stream as the learner.
Eigen::VectorXd simulate_equal_power(const RunConfig& config, std::uint64_t seed, double p_total, std::size_t steps);

/// Bisection on the total power for the smallest value meeting all delay limits.
BaselineResult mimo_equal_power_baseline(const RunConfig& config, std::uint64_t seed);

/// Output directory for a config: $SCAOPO_OUTPUT_ROOT or output.root, then output.name.
std::filesystem::path output_directory(const RunConfig& config);

void write_metrics_csv(std::ostream& os, const std::vector<IterationRecord>& log, bool wall_time);
void write_aggregate_csv(std::ostream& os, const std::vector<SeedResult>& seeds);

/// Runs all seeds (in parallel workers), writes config.json, per-seed CSVs,
/// the aggregate CSV and summary.json. Returns ok = false if any seed failed.
ExperimentResult run_experiment(const RunConfig& config);

}  // namespace scaopo
