// SPDX-License-Identifier: Apache-2.0
#include "scaopo/mlp_policy.hpp"

#include <cmath>
#include <numbers>

#include "scaopo/error.hpp"
#include "scaopo/kernels.hpp"

namespace scaopo {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

struct GaussianMlpPolicy::Trace {
  // activations[0] is the input, activations[l] the post-activation of hidden layer l.
  std::vector<Eigen::VectorXd> activations;
  Eigen::VectorXd output;    // output pre-activation
  Eigen::VectorXd squashed;  // after the output activation
};

GaussianMlpPolicy::GaussianMlpPolicy(MlpArch arch, ActionBox box) : arch_(std::move(arch)), box_(std::move(box)) {
  if (arch_.input_dim == 0 || arch_.output_dim == 0) throw ConfigError("mlp: input and output dims must be positive");
  if (static_cast<std::size_t>(box_.dim()) != arch_.output_dim)
    throw ConfigError("mlp: action box dimension does not match output_dim");
  std::size_t in = arch_.input_dim;
  std::size_t offset = 0;
  auto add_layer = [&](std::size_t out) {
    if (out == 0) throw ConfigError("mlp: hidden layer width must be positive");
    LayerOffsets l{in, out, offset, offset + in * out};
    offset = l.bias + out;
    layers_.push_back(l);
    in = out;
  };
  for (std::size_t h : arch_.hidden_dims) add_layer(h);
  add_layer(arch_.output_dim);
  log_std_offset_ = offset;
  num_params_ = offset + arch_.output_dim;
}

void GaussianMlpPolicy::check_params(const PolicyParams& params) const {
  if (static_cast<std::size_t>(params.size()) != num_params_)
    throw ConfigError("mlp: parameter vector has length " + std::to_string(params.size()) + ", expected " +
                      std::to_string(num_params_));
}

void GaussianMlpPolicy::check_state(const Eigen::VectorXd& state) const {
  if (static_cast<std::size_t>(state.size()) != arch_.input_dim)
    throw ConfigError("mlp: state has dimension " + std::to_string(state.size()) + ", expected " +
                      std::to_string(arch_.input_dim));
}

Eigen::VectorXd GaussianMlpPolicy::initial_log_std() const { return (0.25 * box_.width().array()).log().matrix(); }

PolicyParams GaussianMlpPolicy::initial_params(Rng& rng) const {
  PolicyParams p = PolicyParams::Zero(static_cast<Eigen::Index>(num_params_));
  for (const LayerOffsets& l : layers_) {
    const double r = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (std::size_t k = 0; k < l.in * l.out; ++k) p[static_cast<Eigen::Index>(l.weights + k)] = rng.uniform(-r, r);
  }
  p.tail(static_cast<Eigen::Index>(arch_.output_dim)) = initial_log_std();
  return p;
}

UnpackedParams GaussianMlpPolicy::unflatten(const PolicyParams& params) const {
  check_params(params);
  UnpackedParams u;
  for (const LayerOffsets& l : layers_) {
    DenseLayer d;
    d.weights = ConstRowMap(params.data() + l.weights, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
    d.bias = params.segment(static_cast<Eigen::Index>(l.bias), static_cast<Eigen::Index>(l.out));
    u.layers.push_back(std::move(d));
  }
  u.log_std = params.tail(static_cast<Eigen::Index>(arch_.output_dim));
  return u;
}

PolicyParams GaussianMlpPolicy::flatten(const UnpackedParams& u) const {
  if (u.layers.size() != layers_.size() || static_cast<std::size_t>(u.log_std.size()) != arch_.output_dim)
    throw ConfigError("mlp: unpacked parameters do not match the architecture");
  PolicyParams p(static_cast<Eigen::Index>(num_params_));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerOffsets& l = layers_[i];
    const DenseLayer& d = u.layers[i];
    if (static_cast<std::size_t>(d.weights.rows()) != l.out || static_cast<std::size_t>(d.weights.cols()) != l.in ||
        static_cast<std::size_t>(d.bias.size()) != l.out)
      throw ConfigError("mlp: layer " + std::to_string(i) + " has the wrong shape");
    RowMap(p.data() + l.weights, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)) = d.weights;
    p.segment(static_cast<Eigen::Index>(l.bias), static_cast<Eigen::Index>(l.out)) = d.bias;
  }
  p.tail(static_cast<Eigen::Index>(arch_.output_dim)) = u.log_std;
  return p;
}

void GaussianMlpPolicy::forward(const PolicyParams& params, const Eigen::VectorXd& state, Trace& trace) const {
  check_params(params);
  check_state(state);
  trace.activations.resize(layers_.size());
  trace.activations[0] = state;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerOffsets& l = layers_[i];
    const ConstRowMap w(params.data() + l.weights, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
    Eigen::VectorXd z = w * trace.activations[i] + params.segment(static_cast<Eigen::Index>(l.bias), static_cast<Eigen::Index>(l.out));
    if (i + 1 < layers_.size()) {
      if (arch_.hidden == HiddenActivation::tanh) z = z.array().tanh().matrix();
      trace.activations[i + 1] = std::move(z);
    } else {
      trace.output = std::move(z);
    }
  }
  if (arch_.output == OutputActivation::sigmoid)
    trace.squashed = trace.output.unaryExpr([](double x) { return sigmoid(x); });
  else
    trace.squashed = trace.output;
}

Eigen::VectorXd GaussianMlpPolicy::mean_from_trace(const Trace& trace) const {
  if (arch_.output == OutputActivation::sigmoid)
    return box_.lo + trace.squashed.cwiseProduct(box_.width());
  return trace.squashed;
}

void GaussianMlpPolicy::backward(const PolicyParams& params, const Trace& trace, const Eigen::VectorXd& dmean,
                                 std::span<double> out) const {
  if (out.size() != num_params_) throw ConfigError("mlp: gradient buffer has the wrong length");
  Eigen::VectorXd delta = dmean;
  if (arch_.output == OutputActivation::sigmoid) {
    const Eigen::ArrayXd s = trace.squashed.array();
    delta = (delta.array() * box_.width().array() * s * (1.0 - s)).matrix();
  }
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const LayerOffsets& l = layers_[i];
    const Eigen::VectorXd& input = trace.activations[i];
    RowMap(out.data() + l.weights, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)).noalias() =
        delta * input.transpose();
    Eigen::Map<Eigen::VectorXd>(out.data() + l.bias, static_cast<Eigen::Index>(l.out)) = delta;
    if (i == 0) break;
    const ConstRowMap w(params.data() + l.weights, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in));
    Eigen::VectorXd prev = w.transpose() * delta;
    if (arch_.hidden == HiddenActivation::tanh) prev.array() *= 1.0 - input.array().square();
    delta = std::move(prev);
  }
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(log_std_offset_), out.end(), 0.0);
}

Eigen::VectorXd GaussianMlpPolicy::forward_mean(const PolicyParams& params, const Eigen::VectorXd& state) const {
  Trace t;
  forward(params, state, t);
  return t.squashed;
}

Eigen::VectorXd GaussianMlpPolicy::mean_action(const PolicyParams& params, const Eigen::VectorXd& state) const {
  Trace t;
  forward(params, state, t);
  return mean_from_trace(t);
}

GaussianAction GaussianMlpPolicy::sample_action(const PolicyParams& params, const Eigen::VectorXd& state,
                                                Rng& rng) const {
  const Eigen::VectorXd mean = mean_action(params, state);
  const Eigen::VectorXd log_std = params.tail(static_cast<Eigen::Index>(arch_.output_dim));
  GaussianAction a;
  a.raw.resize(mean.size());
  a.log_prob = 0.0;
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double z = rng.normal();
    a.raw[k] = mean[k] + std::exp(log_std[k]) * z;
    a.log_prob += -0.5 * z * z - log_std[k] - kHalfLog2Pi;
  }
  a.action = box_.clip(a.raw);
  return a;
}

double GaussianMlpPolicy::log_prob(const PolicyParams& params, const Eigen::VectorXd& state,
                                   const Eigen::VectorXd& raw) const {
  const Eigen::VectorXd mean = mean_action(params, state);
  if (raw.size() != mean.size()) throw ConfigError("mlp: action has the wrong dimension");
  double lp = 0.0;
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double ls = params[static_cast<Eigen::Index>(log_std_offset_) + k];
    const double z = (raw[k] - mean[k]) / std::exp(ls);
    lp += -0.5 * z * z - ls - kHalfLog2Pi;
  }
  return lp;
}

void GaussianMlpPolicy::grad_log_prob(const PolicyParams& params, const Eigen::VectorXd& state,
                                      const Eigen::VectorXd& raw, std::span<double> out) const {
  Trace t;
  forward(params, state, t);
  const Eigen::VectorXd mean = mean_from_trace(t);
  if (raw.size() != mean.size()) throw ConfigError("mlp: action has the wrong dimension");
  Eigen::VectorXd dmean(mean.size());
  Eigen::VectorXd dlog_std(mean.size());
  for (Eigen::Index k = 0; k < mean.size(); ++k) {
    const double inv_var = std::exp(-2.0 * params[static_cast<Eigen::Index>(log_std_offset_) + k]);
    const double diff = raw[k] - mean[k];
    dmean[k] = diff * inv_var;
    dlog_std[k] = diff * diff * inv_var - 1.0;
  }
  backward(params, t, dmean, out);
  for (Eigen::Index k = 0; k < mean.size(); ++k) out[log_std_offset_ + static_cast<std::size_t>(k)] = dlog_std[k];
}

Eigen::VectorXd GaussianMlpPolicy::grad_log_prob(const PolicyParams& params, const Eigen::VectorXd& state,
                                                 const Eigen::VectorXd& raw) const {
  Eigen::VectorXd g(static_cast<Eigen::Index>(num_params_));
  grad_log_prob(params, state, raw, std::span<double>(g.data(), num_params_));
  return g;
}

void GaussianMlpPolicy::backprop_mean(const PolicyParams& params, const Eigen::VectorXd& state,
                                      const Eigen::VectorXd& dmean, std::span<double> out) const {
  Trace t;
  forward(params, state, t);
  if (static_cast<std::size_t>(dmean.size()) != arch_.output_dim) throw ConfigError("mlp: dmean has the wrong dimension");
  backward(params, t, dmean, out);
}

PolicyParams project_to_box(PolicyParams params, double bound) {
  if (!(bound > 0.0)) throw ConfigError("parameter box bound must be positive");
  kernels::clamp(std::span<double>(params.data(), static_cast<std::size_t>(params.size())), -bound, bound);
  return params;
}

}  // namespace scaopo
