// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scaopo/box.hpp"
#include "scaopo/rng.hpp"

namespace scaopo {

enum class HiddenActivation { tanh, identity };
enum class OutputActivation { sigmoid, identity };

/// Fully-connected network shape. Defaults are the tanh/sigmoid 128-128 net.
struct MlpArch {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{128, 128};
  std::size_t output_dim = 0;
  HiddenActivation hidden = HiddenActivation::tanh;
  OutputActivation output = OutputActivation::sigmoid;
};

/// Flat parameter vector: for each dense layer the row-major weight matrix
/// (out x in) followed by its bias, then one log standard deviation per
/// action dimension.
using PolicyParams = Eigen::VectorXd;

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
};

struct UnpackedParams {
  std::vector<DenseLayer> layers;
  Eigen::VectorXd log_std;
};

struct GaussianAction {
  Eigen::VectorXd action;  // clipped into the action box
  Eigen::VectorXd raw;     // pre-clip sample; the score function is evaluated here
  double log_prob = 0.0;   // density of raw, nats
};

/// Gaussian policy whose mean is an MLP of the state and whose log standard
/// deviations are state-independent trainable parameters.
///
/// With a sigmoid output layer the mean is lo + sigmoid(o) * (hi - lo); with an
/// identity output layer the network output is the mean itself.
class GaussianMlpPolicy {
 public:
  GaussianMlpPolicy(MlpArch arch, ActionBox box);

  const MlpArch& arch() const { return arch_; }
  const ActionBox& action_box() const { return box_; }
  std::size_t num_params() const { return num_params_; }
  std::size_t action_dim() const { return arch_.output_dim; }
  std::size_t state_dim() const { return arch_.input_dim; }
  std::size_t log_std_offset() const { return log_std_offset_; }

  /// Fan-in uniform weights, zero biases, log_std = log(0.25 (hi - lo)).
  PolicyParams initial_params(Rng& rng) const;
  /// Default log standard deviation per action dimension.
  Eigen::VectorXd initial_log_std() const;

  UnpackedParams unflatten(const PolicyParams& params) const;
  PolicyParams flatten(const UnpackedParams& unpacked) const;

  /// Network output after the output activation; in (0, 1) for sigmoid.
  Eigen::VectorXd forward_mean(const PolicyParams& params, const Eigen::VectorXd& state) const;
  /// Mean action in action coordinates.
  Eigen::VectorXd mean_action(const PolicyParams& params, const Eigen::VectorXd& state) const;

  GaussianAction sample_action(const PolicyParams& params, const Eigen::VectorXd& state, Rng& rng) const;
  double log_prob(const PolicyParams& params, const Eigen::VectorXd& state, const Eigen::VectorXd& raw) const;

  /// Gradient of log N(raw; mean(state), diag(sigma^2)) w.r.t. the flat parameters.
  Eigen::VectorXd grad_log_prob(const PolicyParams& params, const Eigen::VectorXd& state,
                                const Eigen::VectorXd& raw) const;
  void grad_log_prob(const PolicyParams& params, const Eigen::VectorXd& state, const Eigen::VectorXd& raw,
                     std::span<double> out) const;

  /// out = (d mean_action / d params)^T * dmean. Log-std entries are zeroed.
  void backprop_mean(const PolicyParams& params, const Eigen::VectorXd& state, const Eigen::VectorXd& dmean,
                     std::span<double> out) const;

 private:
  struct LayerOffsets {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weights = 0;
    std::size_t bias = 0;
  };
  struct Trace;

  void check_params(const PolicyParams& params) const;
  void check_state(const Eigen::VectorXd& state) const;
  void forward(const PolicyParams& params, const Eigen::VectorXd& state, Trace& trace) const;
  Eigen::VectorXd mean_from_trace(const Trace& trace) const;
  void backward(const PolicyParams& params, const Trace& trace, const Eigen::VectorXd& dmean,
                std::span<double> out) const;

  MlpArch arch_;
  ActionBox box_;
  std::vector<LayerOffsets> layers_;
  std::size_t log_std_offset_ = 0;
  std::size_t num_params_ = 0;
};

/// Elementwise clamp into [-bound, bound]. Requires bound > 0.
PolicyParams project_to_box(PolicyParams params, double bound);

}  // namespace scaopo
