// SPDX-License-Identifier: Apache-2.0
// Finite-difference and naive-evaluation oracles shared by the unit tests and
// the acceptance binary.
#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

#include "scaopo/mlp_policy.hpp"

namespace scaopo::testing {

/// Central differences of f at x with step h in every coordinate.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd y = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    y[j] = x[j] + h;
    const double up = f(y);
    y[j] = x[j] - h;
    const double down = f(y);
    y[j] = x[j];
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_j |a_j - b_j| / max_j |b_j|: the error relative to the oracle's scale.
inline double max_relative_error(const Eigen::VectorXd& got, const Eigen::VectorXd& oracle) {
  const double scale = std::max(oracle.cwiseAbs().maxCoeff(), 1e-12);
  return (got - oracle).cwiseAbs().maxCoeff() / scale;
}

/// Straightforward forward pass written independently of the library's
/// offset bookkeeping: layers are read one after another from the flat vector.
inline Eigen::VectorXd naive_forward(const MlpArch& arch, const Eigen::VectorXd& params, const Eigen::VectorXd& state) {
  Eigen::VectorXd x = state;
  Eigen::Index pos = 0;
  std::vector<std::size_t> widths = arch.hidden_dims;
  widths.push_back(arch.output_dim);
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(widths[l]);
    Eigen::VectorXd y(out);
    for (Eigen::Index r = 0; r < out; ++r) {
      double s = 0.0;
      for (Eigen::Index c = 0; c < x.size(); ++c) s += params[pos + r * x.size() + c] * x[c];
      y[r] = s;
    }
    pos += out * x.size();
    for (Eigen::Index r = 0; r < out; ++r) y[r] += params[pos + r];
    pos += out;
    const bool last = l + 1 == widths.size();
    for (Eigen::Index r = 0; r < out; ++r) {
      if (!last && arch.hidden == HiddenActivation::tanh) y[r] = std::tanh(y[r]);
      if (last && arch.output == OutputActivation::sigmoid) y[r] = 1.0 / (1.0 + std::exp(-y[r]));
    }
    x = y;
  }
  return x;
}

}  // namespace scaopo::testing
