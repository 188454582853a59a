// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scaopo/mlp_policy.hpp"

namespace scaopo {

/// (m+1) x n_theta, one gradient estimate per cost function, rows contiguous.
using GradientMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One transition. shifted_costs[0] = C_0, shifted_costs[i] = C_i - c_i.
struct Experience {
  Eigen::VectorXd state;
  Eigen::VectorXd action;  // pre-clip sample
  Eigen::VectorXd shifted_costs;
};

/// Ring buffer of the latest 2T experiences in arrival order.
class ReplayWindow {
 public:
  ReplayWindow(std::size_t half_length, std::size_t state_dim, std::size_t action_dim, std::size_t num_costs);

  std::size_t half_length() const { return half_length_; }
  std::size_t capacity() const { return 2 * half_length_; }
  std::size_t size() const { return size_; }
  bool full() const { return size_ == capacity(); }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t num_costs() const { return num_costs_; }

  void push(Experience e);
  void push_batch(std::span<const Experience> batch);

  /// i = 0 is the oldest stored experience.
  const Experience& operator[](std::size_t i) const { return slots_[(head_ + i) % slots_.size()]; }

  /// Changes T, keeping the newest min(size, 2T) experiences.
  void resize(std::size_t half_length);
  void clear();

 private:
  std::size_t half_length_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t num_costs_;
  std::vector<Experience> slots_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// Recursive estimates of the cost values and gradients at the current iterate.
struct EstimateState {
  Eigen::VectorXd J_hat;
  GradientMatrix g_hat;
  std::size_t t = 0;  // number of updates applied
};

/// Sample average of every shifted cost over the full window.
Eigen::VectorXd sample_value(const ReplayWindow& window);

/// Off-policy gradient realization.
///
/// Each of the T oldest experiences anchors a forward window of T costs:
///   Qhat_i(l) = sum_{k=0}^{T-1} (C'_i[l+k] - J_hat_i),
///   gtilde_i  = (1/T) sum_{l=0}^{T-1} Qhat_i(l) * grad log pi_params(a_l | s_l),
/// with the score evaluated at the current parameters for every stored pair.
GradientMatrix sample_gradient(const ReplayWindow& window, const GaussianMlpPolicy& policy,
                               const PolicyParams& params, const Eigen::VectorXd& J_hat);

/// Windowed Q estimates Qhat_i(l) for l < T as an (m+1) x T matrix.
Eigen::MatrixXd windowed_q_values(const ReplayWindow& window, const Eigen::VectorXd& J_hat);

/// J_hat <- (1-alpha) J_hat + alpha J_tilde and likewise for g_hat; t += 1.
/// An empty state is initialized from the realizations; alpha must lie in (0, 1].
EstimateState update_estimates(EstimateState est, const Eigen::VectorXd& J_tilde, const GradientMatrix& g_tilde,
                               double alpha);

enum class WindowMode { constant, logarithmic };

/// Number of samples T used at iteration t.
struct WindowSchedule {
  WindowMode mode = WindowMode::constant;
  std::size_t half_length = 1500;  // constant mode
  std::size_t min_half_length = 50;  // logarithmic mode floor
  double log_scale = 10.0;           // logarithmic mode: ceil(log_scale * ln(t + e))

  std::size_t at(std::size_t t) const;
};

/// One row per experience: state..., action..., C'_0..C'_m.
void write_window_csv(const ReplayWindow& window, std::ostream& os);

}  // namespace scaopo
