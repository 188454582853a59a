// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "scaopo/environment.hpp"

namespace scaopo {

/// s' = A s + B a + eps, eps ~ N(0, noise_std^2 I); C_i = s'Q_i s + a'R_i a.
struct LqrParams {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  std::vector<Eigen::MatrixXd> Q;  // i = 0..m
  std::vector<Eigen::MatrixXd> R;
  double noise_std = 0.1;
  double spectral_radius = 0.8;

  std::size_t state_dim() const { return static_cast<std::size_t>(A.rows()); }
  std::size_t action_dim() const { return static_cast<std::size_t>(B.cols()); }
  std::size_t num_constraints() const { return Q.size() - 1; }
};

/// Gaussian A rescaled to the target spectral radius, Gaussian B, Gram cost matrices.
LqrParams lqr_make(std::uint64_t seed, std::size_t n_s, std::size_t n_a, std::size_t m,
                   double spectral_radius = 0.8, double noise_std = 0.1);

double spectral_radius(const Eigen::MatrixXd& A);

class LqrEnv final : public Environment {
 public:
  LqrEnv(LqrParams params, ActionBox box, Eigen::VectorXd limits, double state_clip = 50.0);

  const EnvSpec& spec() const override { return spec_; }
  std::string name() const override { return "lqr"; }
  void reset(Rng& rng) override;
  Eigen::VectorXd observe() const override { return state_; }
  StepResult step(const Eigen::VectorXd& action, Rng& rng) override;
  nlohmann::json snapshot() const override;
  void restore(const nlohmann::json& snap) override;

  const LqrParams& params() const { return params_; }
  /// Number of state coordinates clipped to [-state_clip, state_clip] so far.
  std::uint64_t clip_count() const { return clip_count_; }
  void set_state(const Eigen::VectorXd& s);

 private:
  LqrParams params_;
  EnvSpec spec_;
  double state_clip_;
  Eigen::VectorXd state_;
  std::uint64_t clip_count_ = 0;
};

/// Constraint limits factor * (average C_i) measured over `steps` slots under
/// the state-blind policy a = clip(centre of box + action_std * z).
Eigen::VectorXd lqr_reference_limits(const LqrParams& params, const ActionBox& box, const Eigen::VectorXd& action_std,
                                     std::size_t steps, double factor, Rng& rng, double state_clip = 50.0);

}  // namespace scaopo
