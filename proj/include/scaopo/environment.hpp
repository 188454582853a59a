// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "scaopo/box.hpp"
#include "scaopo/rng.hpp"

namespace scaopo {

/// Static description of a constrained average-cost environment.
struct EnvSpec {
  std::size_t state_dim = 0;
  ActionBox action_box;
  std::size_t num_constraints = 0;
  Eigen::VectorXd limits;  // c_1..c_m

  void validate() const;
};

struct StepResult {
  Eigen::VectorXd next_state;
  Eigen::VectorXd costs;  // C_0..C_m, unshifted
};

/// Stateful environment driven by an external random stream.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::string name() const = 0;

  virtual void reset(Rng& rng) = 0;
  virtual Eigen::VectorXd observe() const = 0;

  /// Advances one slot. Throws ContractViolation if the action is outside the box.
  virtual StepResult step(const Eigen::VectorXd& action, Rng& rng) = 0;

  /// Dynamic state only; the instance parameters are rebuilt from the config.
  virtual nlohmann::json snapshot() const = 0;
  virtual void restore(const nlohmann::json& snap) = 0;
};

/// Throws ContractViolation unless the action has the right size, is finite
/// and lies inside the box.
void check_action(const EnvSpec& spec, const Eigen::VectorXd& action);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

}  // namespace scaopo
