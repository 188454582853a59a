// SPDX-License-Identifier: Apache-2.0
#include "scaopo/offpolicy_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "scaopo/error.hpp"
#include "scaopo/kernels.hpp"

namespace scaopo {

ReplayWindow::ReplayWindow(std::size_t half_length, std::size_t state_dim, std::size_t action_dim,
                           std::size_t num_costs)
    : half_length_(half_length), state_dim_(state_dim), action_dim_(action_dim), num_costs_(num_costs) {
  if (half_length == 0) throw ConfigError("replay window: T must be positive");
  if (num_costs == 0) throw ConfigError("replay window: need at least the objective cost");
  slots_.resize(capacity());
}

void ReplayWindow::push(Experience e) {
  if (static_cast<std::size_t>(e.state.size()) != state_dim_ || static_cast<std::size_t>(e.action.size()) != action_dim_ ||
      static_cast<std::size_t>(e.shifted_costs.size()) != num_costs_)
    throw ConfigError("replay window: experience dimensions do not match the window");
  const std::size_t cap = slots_.size();
  if (size_ < cap) {
    slots_[(head_ + size_) % cap] = std::move(e);
    ++size_;
  } else {
    slots_[head_] = std::move(e);
    head_ = (head_ + 1) % cap;
  }
}

void ReplayWindow::push_batch(std::span<const Experience> batch) {
  for (const Experience& e : batch) push(e);
}

void ReplayWindow::resize(std::size_t half_length) {
  if (half_length == 0) throw ConfigError("replay window: T must be positive");
  if (half_length == half_length_) return;
  const std::size_t keep = std::min(size_, 2 * half_length);
  std::vector<Experience> next(2 * half_length);
  for (std::size_t i = 0; i < keep; ++i) next[i] = std::move(slots_[(head_ + size_ - keep + i) % slots_.size()]);
  slots_ = std::move(next);
  half_length_ = half_length;
  head_ = 0;
  size_ = keep;
}

void ReplayWindow::clear() {
  head_ = 0;
  size_ = 0;
}

namespace {

void require_full(const ReplayWindow& window) {
  if (!window.full())
    throw NotReadyError("replay window holds " + std::to_string(window.size()) + " of " +
                        std::to_string(window.capacity()) + " experiences");
}

}  // namespace

Eigen::VectorXd sample_value(const ReplayWindow& window) {
  require_full(window);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(window.num_costs()));
  for (std::size_t l = 0; l < window.size(); ++l) sum += window[l].shifted_costs;
  return sum / static_cast<double>(window.size());
}

Eigen::MatrixXd windowed_q_values(const ReplayWindow& window, const Eigen::VectorXd& J_hat) {
  require_full(window);
  const auto m1 = static_cast<Eigen::Index>(window.num_costs());
  if (J_hat.size() != m1) throw ConfigError("J_hat has the wrong length");
  const std::size_t T = window.half_length();
  // prefix[k] = sum of the first k shifted costs
  Eigen::MatrixXd prefix = Eigen::MatrixXd::Zero(m1, static_cast<Eigen::Index>(2 * T + 1));
  for (std::size_t l = 0; l < 2 * T; ++l)
    prefix.col(static_cast<Eigen::Index>(l + 1)) = prefix.col(static_cast<Eigen::Index>(l)) + window[l].shifted_costs;
  Eigen::MatrixXd q(m1, static_cast<Eigen::Index>(T));
  const double len = static_cast<double>(T);
  for (std::size_t l = 0; l < T; ++l)
    q.col(static_cast<Eigen::Index>(l)) =
        prefix.col(static_cast<Eigen::Index>(l + T)) - prefix.col(static_cast<Eigen::Index>(l)) - len * J_hat;
  return q;
}

GradientMatrix sample_gradient(const ReplayWindow& window, const GaussianMlpPolicy& policy,
                               const PolicyParams& params, const Eigen::VectorXd& J_hat) {
  const Eigen::MatrixXd q = windowed_q_values(window, J_hat);
  const std::size_t n = policy.num_params();
  const std::size_t T = window.half_length();
  GradientMatrix g = GradientMatrix::Zero(q.rows(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd score(static_cast<Eigen::Index>(n));
  const std::span<double> score_span(score.data(), n);
  for (std::size_t l = 0; l < T; ++l) {
    const Experience& e = window[l];
    policy.grad_log_prob(params, e.state, e.action, score_span);
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      kernels::axpy(q(i, static_cast<Eigen::Index>(l)), score_span, std::span<double>(g.row(i).data(), n));
  }
  g /= static_cast<double>(T);
  return g;
}

EstimateState update_estimates(EstimateState est, const Eigen::VectorXd& J_tilde, const GradientMatrix& g_tilde,
                               double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("update_estimates: alpha must lie in (0, 1]");
  if (J_tilde.size() != g_tilde.rows()) throw ConfigError("update_estimates: value/gradient row mismatch");
  if (est.J_hat.size() == 0) {
    est.J_hat = Eigen::VectorXd::Zero(J_tilde.size());
    est.g_hat = GradientMatrix::Zero(g_tilde.rows(), g_tilde.cols());
  }
  if (est.J_hat.size() != J_tilde.size() || est.g_hat.rows() != g_tilde.rows() || est.g_hat.cols() != g_tilde.cols())
    throw ConfigError("update_estimates: dimension mismatch with the running estimates");
  kernels::blend(alpha, std::span<const double>(J_tilde.data(), static_cast<std::size_t>(J_tilde.size())),
                 std::span<double>(est.J_hat.data(), static_cast<std::size_t>(est.J_hat.size())));
  kernels::blend(alpha, std::span<const double>(g_tilde.data(), static_cast<std::size_t>(g_tilde.size())),
                 std::span<double>(est.g_hat.data(), static_cast<std::size_t>(est.g_hat.size())));
  ++est.t;
  return est;
}

std::size_t WindowSchedule::at(std::size_t t) const {
  if (mode == WindowMode::constant) return half_length;
  const double v = std::ceil(log_scale * std::log(static_cast<double>(t) + std::numbers::e));
  return std::max(min_half_length, static_cast<std::size_t>(v));
}

void write_window_csv(const ReplayWindow& window, std::ostream& os) {
  char buf[32];
  for (std::size_t k = 0; k < window.state_dim(); ++k) os << (k ? "," : "") << "s" << k;
  for (std::size_t k = 0; k < window.action_dim(); ++k) os << ",a" << k;
  for (std::size_t k = 0; k < window.num_costs(); ++k) os << ",c" << k;
  os << '\n';
  auto put = [&](const Eigen::VectorXd& v, bool first) {
    for (Eigen::Index k = 0; k < v.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", v[k]);
      os << (first && k == 0 ? "" : ",") << buf;
    }
  };
  for (std::size_t l = 0; l < window.size(); ++l) {
    put(window[l].state, true);
    put(window[l].action, false);
    put(window[l].shifted_costs, false);
    os << '\n';
  }
}

}  // namespace scaopo
