// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include <Eigen/Core>

#include "scaopo/mlp_policy.hpp"
#include "scaopo/tabular_env.hpp"

namespace scaopo {

/// pi(a|s) as an n_states x n_actions table.
struct TabularPolicy {
  Eigen::MatrixXd prob;

  void validate() const;
  static TabularPolicy uniform(std::size_t n_states, std::size_t n_actions);
};

/// P_pi(s, s') = sum_a pi(a|s) P[a](s, s').
Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const TabularPolicy& policy);

/// Left fixed point mu P = mu with sum(mu) = 1. Throws NumericError for non-ergodic chains.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P);

/// Stationary average of costs[i] - shift.
double exact_average(const TabularMdp& mdp, const TabularPolicy& policy, std::size_t i, double shift = 0.0);

/// Differential values of costs[i] - shift, normalized by sum_s mu(s) V(s) = 0.
struct DifferentialValues {
  Eigen::MatrixXd Q;  // n_states x n_actions
  Eigen::VectorXd V;
  Eigen::VectorXd mu;
  double J = 0.0;
};

DifferentialValues exact_q(const TabularMdp& mdp, const TabularPolicy& policy, std::size_t i, double shift = 0.0);

/// Discrete policy induced by a one-output Gaussian policy on one-hot states
/// over the box [0, 1]: action k is taken when the sample falls in the k-th of
/// n_actions equal bins, the outer bins absorbing the clipped tails.
struct BinnedGaussianPolicy {
  TabularPolicy table;
  std::vector<Eigen::MatrixXd> grad_log;  // per state: n_actions x n_params, rows grad log pi(a|s)
};

BinnedGaussianPolicy binned_policy(const GaussianMlpPolicy& policy, const PolicyParams& params,
                                   std::size_t n_states, std::size_t n_actions);

/// sum_s mu(s) sum_a pi(a|s) Q_i(s, a) grad log pi(a|s) for the binned policy.
Eigen::VectorXd exact_gradient(const TabularMdp& mdp, const GaussianMlpPolicy& policy, const PolicyParams& params,
                               std::size_t i);

}  // namespace scaopo
