// SPDX-License-Identifier: Apache-2.0
#include "scaopo/tabular_oracle.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "scaopo/error.hpp"

namespace scaopo {
namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  if (!std::isfinite(z)) return 0.0;
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// z * phi(z), zero at infinity.
double z_pdf(double z) { return std::isfinite(z) ? z * normal_pdf(z) : 0.0; }

void check_shapes(const TabularMdp& mdp, const TabularPolicy& policy) {
  if (policy.prob.rows() != static_cast<Eigen::Index>(mdp.n_states) ||
      policy.prob.cols() != static_cast<Eigen::Index>(mdp.n_actions))
    throw ConfigError("tabular policy shape does not match the MDP");
}

}  // namespace

void TabularPolicy::validate() const {
  if ((prob.array() < 0.0).any()) throw ConfigError("tabular policy has negative entries");
  if (((prob.rowwise().sum().array() - 1.0).abs() > 1e-12).any()) throw ConfigError("tabular policy rows must sum to one");
}

TabularPolicy TabularPolicy::uniform(std::size_t n_states, std::size_t n_actions) {
  return {Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions),
                                    1.0 / static_cast<double>(n_actions))};
}

Eigen::MatrixXd policy_transition(const TabularMdp& mdp, const TabularPolicy& policy) {
  check_shapes(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < mdp.n_actions; ++a)
    P += policy.prob.col(static_cast<Eigen::Index>(a)).asDiagonal() * mdp.P[a];
  return P;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P) {
  const Eigen::Index n = P.rows();
  if (n == 0 || P.cols() != n) throw ConfigError("stationary_distribution: matrix must be square");
  // mu (I - P + 1 1^T) = 1^T has a unique solution iff the chain has one recurrent class.
  const Eigen::MatrixXd M = (Eigen::MatrixXd::Identity(n, n) - P + Eigen::MatrixXd::Ones(n, n)).transpose();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) throw NumericError("stationary_distribution: chain is not ergodic");
  Eigen::VectorXd mu = lu.solve(Eigen::VectorXd::Ones(n));
  if ((mu.array() < -1e-12).any()) throw NumericError("stationary_distribution: negative stationary mass");
  mu = mu.cwiseMax(0.0);
  return mu / mu.sum();
}

double exact_average(const TabularMdp& mdp, const TabularPolicy& policy, std::size_t i, double shift) {
  if (i >= mdp.costs.size()) throw ConfigError("exact_average: cost index out of range");
  const Eigen::VectorXd mu = stationary_distribution(policy_transition(mdp, policy));
  const Eigen::VectorXd r = policy.prob.cwiseProduct(mdp.costs[i]).rowwise().sum();
  return mu.dot(r) - shift;
}

DifferentialValues exact_q(const TabularMdp& mdp, const TabularPolicy& policy, std::size_t i, double shift) {
  if (i >= mdp.costs.size()) throw ConfigError("exact_q: cost index out of range");
  const Eigen::MatrixXd P = policy_transition(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  DifferentialValues out;
  out.mu = stationary_distribution(P);
  const Eigen::MatrixXd C = mdp.costs[i].array() - shift;
  const Eigen::VectorXd r = policy.prob.cwiseProduct(C).rowwise().sum();
  out.J = out.mu.dot(r);
  // (I - P + 1 mu^T) V = r - J with mu^T V = 0 as the pinned solution.
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n) - P + Eigen::VectorXd::Ones(n) * out.mu.transpose();
  out.V = Z.fullPivLu().solve((r.array() - out.J).matrix());
  out.Q.resize(n, static_cast<Eigen::Index>(mdp.n_actions));
  for (std::size_t a = 0; a < mdp.n_actions; ++a) {
    const auto ai = static_cast<Eigen::Index>(a);
    out.Q.col(ai) = (C.col(ai).array() - out.J).matrix() + mdp.P[a] * out.V;
  }
  return out;
}

BinnedGaussianPolicy binned_policy(const GaussianMlpPolicy& policy, const PolicyParams& params,
                                   std::size_t n_states, std::size_t n_actions) {
  if (policy.action_dim() != 1) throw ConfigError("binned_policy: policy must have one output");
  if (policy.state_dim() != n_states) throw ConfigError("binned_policy: policy input must be the one-hot state");
  const ActionBox& box = policy.action_box();
  if (box.lo[0] != 0.0 || box.hi[0] != 1.0) throw ConfigError("binned_policy: action box must be [0, 1]");
  if (n_actions < 2) throw ConfigError("binned_policy: need at least two actions");
  const std::size_t np = policy.num_params();
  const double log_std = params[static_cast<Eigen::Index>(policy.log_std_offset())];
  const double sd = std::exp(log_std);
  BinnedGaussianPolicy out;
  out.table.prob.resize(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
  std::vector<double> dmean_param(np);
  for (std::size_t s = 0; s < n_states; ++s) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_states));
    x[static_cast<Eigen::Index>(s)] = 1.0;
    const double mean = policy.mean_action(params, x)[0];
    policy.backprop_mean(params, x, Eigen::VectorXd::Ones(1), dmean_param);
    const Eigen::Map<const Eigen::VectorXd> grad_mean(dmean_param.data(), static_cast<Eigen::Index>(np));
    Eigen::MatrixXd g(static_cast<Eigen::Index>(n_actions), static_cast<Eigen::Index>(np));
    for (std::size_t a = 0; a < n_actions; ++a) {
      const double inf = std::numeric_limits<double>::infinity();
      const double lo = a == 0 ? -inf : (static_cast<double>(a) / static_cast<double>(n_actions) - mean) / sd;
      const double hi = a + 1 == n_actions ? inf : (static_cast<double>(a + 1) / static_cast<double>(n_actions) - mean) / sd;
      const double p = (hi == inf ? 1.0 : normal_cdf(hi)) - (lo == -inf ? 0.0 : normal_cdf(lo));
      if (!(p > 0.0)) throw NumericError("binned_policy: action probability underflowed");
      const double dp_dmean = -(normal_pdf(hi) - normal_pdf(lo)) / sd;
      const double dp_dlogstd = -(z_pdf(hi) - z_pdf(lo));
      const auto ai = static_cast<Eigen::Index>(a);
      out.table.prob(static_cast<Eigen::Index>(s), ai) = p;
      g.row(ai) = (dp_dmean / p) * grad_mean.transpose();
      g(ai, static_cast<Eigen::Index>(policy.log_std_offset())) = dp_dlogstd / p;
    }
    out.grad_log.push_back(std::move(g));
  }
  return out;
}

Eigen::VectorXd exact_gradient(const TabularMdp& mdp, const GaussianMlpPolicy& policy, const PolicyParams& params,
                               std::size_t i) {
  const BinnedGaussianPolicy bp = binned_policy(policy, params, mdp.n_states, mdp.n_actions);
  const DifferentialValues dv = exact_q(mdp, bp.table, i);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(policy.num_params()));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      g += dv.mu[si] * bp.table.prob(si, ai) * dv.Q(si, ai) * bp.grad_log[s].row(ai).transpose();
    }
  }
  return g;
}

}  // namespace scaopo
