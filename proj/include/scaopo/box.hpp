// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include "scaopo/error.hpp"

namespace scaopo {

/// Per-dimension action bounds lo < hi.
struct ActionBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  ActionBox() = default;
  ActionBox(Eigen::VectorXd lo_, Eigen::VectorXd hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size() || lo.size() == 0) throw ConfigError("action box: bounds must be non-empty and equal length");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw ConfigError("action box: lo must be < hi in every dimension");
  }

  static ActionBox uniform(Eigen::Index dim, double lo, double hi) {
    return ActionBox(Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi));
  }

  Eigen::Index dim() const { return lo.size(); }
  Eigen::VectorXd width() const { return hi - lo; }

  bool contains(const Eigen::VectorXd& a) const {
    if (a.size() != lo.size()) return false;
    return (a.array() >= lo.array()).all() && (a.array() <= hi.array()).all();
  }

  Eigen::VectorXd clip(const Eigen::VectorXd& a) const { return a.cwiseMax(lo).cwiseMin(hi); }
};

/// The parameter set [-bound, bound]^n.
struct ParamBox {
  double bound = 10.0;

  bool contains(const Eigen::VectorXd& theta) const { return theta.cwiseAbs().maxCoeff() <= bound; }
};

}  // namespace scaopo
