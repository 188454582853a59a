// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scaopo/driver.hpp"
#include "scaopo/environment.hpp"
#include "scaopo/mimo_env.hpp"
#include "scaopo/mlp_policy.hpp"

namespace scaopo {

enum class EnvKind { lqr, mimo, tabular };

struct LqrEnvConfig {
  std::size_t state_dim = 15;
  std::size_t action_dim = 4;
  std::size_t num_constraints = 1;
  double spectral_radius = 0.8;
  double noise_std = 0.1;
  double action_bound = 1.0;  // box [-action_bound, action_bound]^n_a
  double state_clip = 50.0;
  double limit_factor = 1.2;
  std::size_t limit_steps = 10000;
  std::optional<Eigen::VectorXd> limits;  // overrides the reference-policy rule
};

struct TabularEnvConfig {
  std::size_t n_states = 3;
  std::size_t n_actions = 2;
  std::size_t num_constraints = 1;
  std::optional<Eigen::VectorXd> limits;  // default 0.5 each
};

struct EnvConfig {
  EnvKind kind = EnvKind::lqr;
  std::optional<std::uint64_t> instance_seed;  // fixed instance across run seeds when set
  LqrEnvConfig lqr;
  MimoParams mimo;
  TabularEnvConfig tabular;
};

enum class PolicyInit { random, zero_output };

struct PolicyConfig {
  std::vector<std::size_t> hidden{128, 128};
  double bound = 10.0;
  PolicyInit init = PolicyInit::random;
  /// Initial action std as a fraction of the box width.
  double init_std_fraction = 0.25;
};

struct RunSection {
  std::size_t iterations = 1000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t threads = 0;  // 0: one per hardware thread
  std::size_t n_restarts = 1;
  double final_window_fraction = 0.2;
};

struct OutputConfig {
  std::string root = "runs";
  std::string name;
  bool record_wall_time = false;
  bool baseline = true;  // mimo only
  std::size_t baseline_steps = 20000;
};

struct RunConfig {
  EnvConfig env;
  PolicyConfig policy;
  DriverConfig driver;
  RunSection run;
  OutputConfig output;
};

/// Parses and validates; throws ConfigError listing every violation, one per line.
RunConfig parse_config(const nlohmann::json& doc, const std::string& default_name = "run");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical form with every field spelled out; parse_config(to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

std::string env_kind_name(EnvKind kind);
/// "SCAOPO_1" for the replay variant, "SCAOPO_2" without replay.
std::string variant_tag(Variant variant);

/// Seed of the environment instance (system matrices, MDP tables, path geometry).
std::uint64_t instance_seed(const RunConfig& config, std::uint64_t run_seed);

std::unique_ptr<Environment> make_environment(const RunConfig& config, std::uint64_t run_seed);
GaussianMlpPolicy make_policy(const RunConfig& config, const EnvSpec& spec);
/// Initial parameters for a run seed and restart index.
PolicyParams make_initial_params(const RunConfig& config, const GaussianMlpPolicy& policy, std::uint64_t run_seed,
                                 std::size_t restart);

}  // namespace scaopo
