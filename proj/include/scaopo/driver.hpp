// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "scaopo/environment.hpp"
#include "scaopo/mlp_policy.hpp"
#include "scaopo/offpolicy_estimator.hpp"
#include "scaopo/rng.hpp"
#include "scaopo/sca_solver.hpp"

namespace scaopo {

/// alpha_t = t^{-kappa1} (alpha_0 = 1), beta_t = beta0 (t + 1)^{-kappa2}.
struct StepSchedule {
  double kappa1 = 0.6;
  double kappa2 = 0.8;
  double beta0 = 1.0;
  std::optional<double> beta_fixed;  // test mode: constant beta in [0, 1]

  /// Throws ConfigError naming the first violated bound.
  void validate() const;
  /// Every violated bound, empty when valid.
  std::vector<std::string> violations() const;

  double alpha(std::size_t t) const;
  double beta(std::size_t t) const;
};

enum class Variant {
  replay,     // window of 2T experiences, batch new ones per iteration
  no_replay,  // window holds exactly the latest batch
};

struct DriverConfig {
  StepSchedule schedule;
  Eigen::VectorXd sigmas;  // one per cost function
  WindowSchedule window;
  std::size_t batch_size = 100;
  Variant variant = Variant::replay;
  ParamBox box;
  SolverOptions solver;
  bool record_wall_time = false;

  void validate(std::size_t num_costs) const;
};

struct IterationRecord {
  std::size_t t = 0;
  std::uint64_t env_steps = 0;
  Eigen::VectorXd J_hat;          // shifted estimates
  Eigen::VectorXd running_costs;  // window averages of the unshifted costs C_0..C_m
  UpdateKind kind = UpdateKind::objective;
  double violation = 0.0;
  double kkt_residual = 0.0;
  std::size_t solver_iterations = 0;
  double beta = 0.0;
  double wall_ms = 0.0;
};

/// One SCA run on one environment.
///
/// Separate random streams feed the policy samples and the environment so a
/// checkpoint restores both exactly.
class Driver {
 public:
  Driver(std::unique_ptr<Environment> env, GaussianMlpPolicy policy, DriverConfig config, std::uint64_t seed,
         std::optional<PolicyParams> theta0 = std::nullopt);

  /// Resets the environment and fills the window under theta^0.
  void prefill();
  bool prefilled() const { return prefilled_; }

  /// One iteration: sample a batch, update the estimates, solve, move theta.
  IterationRecord step();

  /// step() `iterations` times, prefilling first if needed. The callback sees
  /// every record; an exception from the environment or solver propagates
  /// after the records produced so far were passed on.
  std::vector<IterationRecord> run(std::size_t iterations,
                                   const std::function<void(const IterationRecord&)>& on_record = {});

  const PolicyParams& params() const { return theta_; }
  const EstimateState& estimates() const { return est_; }
  const ReplayWindow& window() const { return window_; }
  const Environment& environment() const { return *env_; }
  Environment& environment() { return *env_; }
  const GaussianMlpPolicy& policy() const { return policy_; }
  const DriverConfig& config() const { return config_; }
  std::size_t iteration() const { return t_; }
  std::uint64_t env_steps() const { return env_steps_; }

  nlohmann::json checkpoint() const;
  /// Restores a checkpoint written by a driver built from the same configuration.
  void restore(const nlohmann::json& ckpt);

 private:
  void sample(std::size_t steps);
  Eigen::VectorXd shift(const Eigen::VectorXd& costs) const;

  std::unique_ptr<Environment> env_;
  GaussianMlpPolicy policy_;
  DriverConfig config_;
  Rng policy_rng_;
  Rng env_rng_;
  PolicyParams theta_;
  ReplayWindow window_;
  EstimateState est_;
  DualWarmStart warm_;
  std::size_t t_ = 0;
  std::uint64_t env_steps_ = 0;
  bool prefilled_ = false;
};

/// Half-length of the window at iteration t for a configuration.
std::size_t window_half_length(const DriverConfig& config, std::size_t t);

/// Parameters whose output layer is zero: the mean action is the box centre
/// and the hidden layers keep their random initialization.
PolicyParams zero_output_params(const GaussianMlpPolicy& policy, Rng& rng);

inline constexpr int kCheckpointVersion = 1;

}  // namespace scaopo
