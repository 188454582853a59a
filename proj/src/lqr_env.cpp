// SPDX-License-Identifier: Apache-2.0
#include "scaopo/lqr_env.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "scaopo/error.hpp"

namespace scaopo {
namespace {

Eigen::MatrixXd gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.normal();
  return m;
}

double quad(const Eigen::MatrixXd& M, const Eigen::VectorXd& x) { return x.dot(M * x); }

}  // namespace

double spectral_radius(const Eigen::MatrixXd& A) {
  if (A.rows() != A.cols() || A.rows() == 0) throw ConfigError("spectral_radius: matrix must be square");
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, false);
  if (es.info() != Eigen::Success) throw NumericError("spectral_radius: eigenvalue solver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

LqrParams lqr_make(std::uint64_t seed, std::size_t n_s, std::size_t n_a, std::size_t m, double rho,
                   double noise_std) {
  if (n_s == 0 || n_a == 0) throw ConfigError("lqr: dimensions must be positive");
  if (!(rho > 0.0)) throw ConfigError("lqr: spectral radius must be positive");
  if (!(noise_std >= 0.0)) throw ConfigError("lqr: noise_std must be nonnegative");
  Rng rng(seed);
  LqrParams p;
  p.A = gaussian_matrix(rng, n_s, n_s);
  p.A *= rho / spectral_radius(p.A);
  p.B = gaussian_matrix(rng, n_s, n_a);
  for (std::size_t i = 0; i <= m; ++i) {
    const Eigen::MatrixXd M = gaussian_matrix(rng, n_s, n_s);
    const Eigen::MatrixXd N = gaussian_matrix(rng, n_a, n_a);
    p.Q.push_back(M.transpose() * M / static_cast<double>(n_s));
    p.R.push_back(N.transpose() * N / static_cast<double>(n_a));
  }
  p.noise_std = noise_std;
  p.spectral_radius = rho;
  return p;
}

LqrEnv::LqrEnv(LqrParams params, ActionBox box, Eigen::VectorXd limits, double state_clip)
    : params_(std::move(params)), state_clip_(state_clip) {
  const auto n = static_cast<Eigen::Index>(params_.state_dim());
  if (params_.A.cols() != n || params_.B.rows() != n) throw ConfigError("lqr: A and B shapes disagree");
  if (params_.Q.empty() || params_.Q.size() != params_.R.size()) throw ConfigError("lqr: need Q_i and R_i for i = 0..m");
  if (box.dim() != params_.B.cols()) throw ConfigError("lqr: action box dimension must equal B's column count");
  if (!(state_clip > 0.0)) throw ConfigError("lqr: state_clip must be positive");
  spec_.state_dim = params_.state_dim();
  spec_.action_box = std::move(box);
  spec_.num_constraints = params_.num_constraints();
  spec_.limits = std::move(limits);
  spec_.validate();
  state_ = Eigen::VectorXd::Zero(n);
}

void LqrEnv::reset(Rng&) {
  state_.setZero();
  clip_count_ = 0;
}

void LqrEnv::set_state(const Eigen::VectorXd& s) {
  if (s.size() != state_.size()) throw ConfigError("lqr: state has the wrong dimension");
  state_ = s;
}

StepResult LqrEnv::step(const Eigen::VectorXd& action, Rng& rng) {
  check_action(spec_, action);
  StepResult r;
  r.costs.resize(static_cast<Eigen::Index>(params_.Q.size()));
  for (std::size_t i = 0; i < params_.Q.size(); ++i)
    r.costs[static_cast<Eigen::Index>(i)] = quad(params_.Q[i], state_) + quad(params_.R[i], action);
  Eigen::VectorXd next = params_.A * state_ + params_.B * action;
  for (Eigen::Index k = 0; k < next.size(); ++k) {
    next[k] += params_.noise_std * rng.normal();
    if (std::abs(next[k]) > state_clip_) {
      next[k] = std::copysign(state_clip_, next[k]);
      ++clip_count_;
    }
  }
  state_ = next;
  r.next_state = std::move(next);
  return r;
}

nlohmann::json LqrEnv::snapshot() const {
  return {{"state", vector_to_json(state_)}, {"clip_count", clip_count_}};
}

void LqrEnv::restore(const nlohmann::json& snap) {
  set_state(vector_from_json(snap.at("state")));
  clip_count_ = snap.at("clip_count").get<std::uint64_t>();
}

Eigen::VectorXd lqr_reference_limits(const LqrParams& params, const ActionBox& box, const Eigen::VectorXd& action_std,
                                     std::size_t steps, double factor, Rng& rng, double state_clip) {
  if (steps == 0) throw ConfigError("lqr: reference horizon must be positive");
  if (action_std.size() != box.dim()) throw ConfigError("lqr: action_std dimension mismatch");
  LqrEnv env(params, box, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.num_constraints())), state_clip);
  env.reset(rng);
  const Eigen::VectorXd centre = 0.5 * (box.lo + box.hi);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.Q.size()));
  Eigen::VectorXd a(box.dim());
  for (std::size_t s = 0; s < steps; ++s) {
    for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = centre[k] + action_std[k] * rng.normal();
    sum += env.step(box.clip(a), rng).costs;
  }
  return factor * sum.tail(sum.size() - 1) / static_cast<double>(steps);
}

}  // namespace scaopo
