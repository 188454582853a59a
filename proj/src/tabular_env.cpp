// SPDX-License-Identifier: Apache-2.0
#include "scaopo/tabular_env.hpp"

#include <cmath>

#include "scaopo/error.hpp"

namespace scaopo {
namespace {

constexpr double kFloor = 0.01;

}  // namespace

void TabularMdp::validate() const {
  if (n_states == 0 || n_actions == 0) throw ConfigError("tabular: need at least one state and one action");
  if (P.size() != n_actions || costs.empty()) throw ConfigError("tabular: table counts do not match");
  const auto n = static_cast<Eigen::Index>(n_states);
  for (const Eigen::MatrixXd& pa : P) {
    if (pa.rows() != n || pa.cols() != n) throw ConfigError("tabular: transition table has the wrong shape");
    if ((pa.array() < 0.0).any()) throw ConfigError("tabular: negative transition probability");
    if (((pa.rowwise().sum().array() - 1.0).abs() > 1e-12).any()) throw ConfigError("tabular: rows must sum to one");
  }
  for (const Eigen::MatrixXd& c : costs)
    if (c.rows() != n || c.cols() != static_cast<Eigen::Index>(n_actions) || !c.allFinite())
      throw ConfigError("tabular: cost table has the wrong shape or non-finite entries");
}

TabularMdp tabular_make(std::size_t n_states, std::size_t n_actions, std::uint64_t seed, std::size_t m) {
  if (n_states == 0 || n_actions == 0) throw ConfigError("tabular: need at least one state and one action");
  Rng rng(seed);
  TabularMdp mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  const auto n = static_cast<Eigen::Index>(n_states);
  for (std::size_t a = 0; a < n_actions; ++a) {
    Eigen::MatrixXd pa(n, n);
    for (Eigen::Index s = 0; s < n; ++s) {
      for (Eigen::Index t = 0; t < n; ++t) pa(s, t) = rng.exponential(1.0);
      pa.row(s) /= pa.row(s).sum();
      pa.row(s) = (1.0 - kFloor) * pa.row(s).array() + kFloor / static_cast<double>(n_states);
      pa.row(s) /= pa.row(s).sum();
    }
    mdp.P.push_back(std::move(pa));
  }
  for (std::size_t i = 0; i <= m; ++i) {
    Eigen::MatrixXd c(n, static_cast<Eigen::Index>(n_actions));
    for (Eigen::Index s = 0; s < c.rows(); ++s)
      for (Eigen::Index a = 0; a < c.cols(); ++a) c(s, a) = rng.uniform();
    mdp.costs.push_back(std::move(c));
  }
  return mdp;
}

std::size_t action_bin(double x, std::size_t n_actions) {
  const double scaled = std::floor(x * static_cast<double>(n_actions));
  if (!(scaled > 0.0)) return 0;
  return std::min(n_actions - 1, static_cast<std::size_t>(scaled));
}

TabularEnv::TabularEnv(TabularMdp mdp, Eigen::VectorXd limits) : mdp_(std::move(mdp)) {
  mdp_.validate();
  spec_.state_dim = mdp_.n_states;
  spec_.action_box = ActionBox::uniform(1, 0.0, 1.0);
  spec_.num_constraints = mdp_.num_constraints();
  spec_.limits = std::move(limits);
  spec_.validate();
}

void TabularEnv::reset(Rng&) { state_ = 0; }

void TabularEnv::set_state(std::size_t s) {
  if (s >= mdp_.n_states) throw ConfigError("tabular: state index out of range");
  state_ = s;
}

Eigen::VectorXd TabularEnv::observe() const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp_.n_states));
  x[static_cast<Eigen::Index>(state_)] = 1.0;
  return x;
}

StepResult TabularEnv::step(const Eigen::VectorXd& action, Rng& rng) {
  check_action(spec_, action);
  const auto a = static_cast<Eigen::Index>(action_bin(action[0], mdp_.n_actions));
  const auto s = static_cast<Eigen::Index>(state_);
  StepResult r;
  r.costs.resize(static_cast<Eigen::Index>(mdp_.costs.size()));
  for (std::size_t i = 0; i < mdp_.costs.size(); ++i) r.costs[static_cast<Eigen::Index>(i)] = mdp_.costs[i](s, a);
  const double u = rng.uniform();
  const Eigen::MatrixXd& pa = mdp_.P[static_cast<std::size_t>(a)];
  double acc = 0.0;
  std::size_t next = mdp_.n_states - 1;
  for (Eigen::Index t = 0; t < pa.cols(); ++t) {
    acc += pa(s, t);
    if (u < acc) {
      next = static_cast<std::size_t>(t);
      break;
    }
  }
  state_ = next;
  r.next_state = observe();
  return r;
}

nlohmann::json TabularEnv::snapshot() const { return {{"state", state_}}; }

void TabularEnv::restore(const nlohmann::json& snap) { set_state(snap.at("state").get<std::size_t>()); }

}  // namespace scaopo
