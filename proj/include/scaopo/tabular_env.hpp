// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "scaopo/environment.hpp"

namespace scaopo {

/// Finite MDP with explicit tables.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<Eigen::MatrixXd> P;      // P[a](s, s')
  std::vector<Eigen::MatrixXd> costs;  // costs[i](s, a), i = 0..m

  std::size_t num_constraints() const { return costs.size() - 1; }
  void validate() const;
};

/// Dirichlet(1) transition rows mixed with a uniform floor so every entry is
/// at least 0.01 / n_states; costs uniform in [0, 1].
TabularMdp tabular_make(std::size_t n_states, std::size_t n_actions, std::uint64_t seed, std::size_t m = 1);

/// Index of the action bin containing x when [0, 1] is split into n_actions equal bins.
std::size_t action_bin(double x, std::size_t n_actions);

/// One-hot states; a one-dimensional continuous action in [0, 1] is binned
/// into the discrete action.
class TabularEnv final : public Environment {
 public:
  TabularEnv(TabularMdp mdp, Eigen::VectorXd limits);

  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "tabular"; }
  void reset(Rng& rng) override;
  Eigen::VectorXd observe() const override;
  StepResult step(const Eigen::VectorXd& action, Rng& rng) override;
  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& snap) override;

  const TabularMdp& mdp() const { return mdp_; }
  std::size_t state() const { return state_; }
  void set_state(std::size_t s);

 private:
  TabularMdp mdp_;
  EnvSpec spec_;
  std::size_t state_ = 0;
};

}  // namespace scaopo
