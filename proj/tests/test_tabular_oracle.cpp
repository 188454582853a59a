// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <doctest.h>

#include <Eigen/Dense>

#include "fd_oracle.hpp"
#include "scaopo/error.hpp"
#include "scaopo/tabular_oracle.hpp"
#include "test_util.hpp"

using namespace scaopo;

namespace {

GaussianMlpPolicy binned_net(std::size_t n_states) {
  MlpArch arch;
  arch.input_dim = n_states;
  arch.hidden_dims = {4};
  arch.output_dim = 1;
  return GaussianMlpPolicy(arch, ActionBox::uniform(1, 0.0, 1.0));
}

PolicyParams binned_params(const GaussianMlpPolicy& pol, Rng& rng) {
  PolicyParams p = testing::random_vector(rng, static_cast<Eigen::Index>(pol.num_params()), -1.0, 1.0);
  p[static_cast<Eigen::Index>(pol.log_std_offset())] = rng.uniform(-1.5, -0.5);
  return p;
}

}  // namespace

TEST_SUITE("tabular_oracle") {
  TEST_CASE("two-state stationary distribution") {
    const double a = 0.3;
    const double b = 0.1;
    Eigen::Matrix2d P;
    P << 1.0 - a, a, b, 1.0 - b;
    const Eigen::VectorXd mu = stationary_distribution(P);
    CHECK(mu[0] == doctest::Approx(b / (a + b)).epsilon(1e-14));
    CHECK(mu[1] == doctest::Approx(a / (a + b)).epsilon(1e-14));
  }

  TEST_CASE("reducible chains are rejected") {
    CHECK_THROWS_AS(stationary_distribution(Eigen::Matrix2d::Identity()), NumericError);
  }

  TEST_CASE("stationary distribution is a left fixed point") {
    const TabularMdp mdp = tabular_make(6, 3, 4);
    const TabularPolicy pi = TabularPolicy::uniform(6, 3);
    const Eigen::MatrixXd P = policy_transition(mdp, pi);
    CHECK(((P.rowwise().sum().array() - 1.0).abs() < 1e-12).all());
    const Eigen::VectorXd mu = stationary_distribution(P);
    CHECK((mu.transpose() * P - mu.transpose()).norm() < 1e-13);
    CHECK(mu.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("differential values solve the Poisson equation") {
    const TabularMdp mdp = tabular_make(5, 2, 9, 1);
    Rng rng(3);
    TabularPolicy pi;
    pi.prob = Eigen::MatrixXd(5, 2);
    for (Eigen::Index s = 0; s < 5; ++s) {
      const double u = rng.uniform(0.1, 0.9);
      pi.prob(s, 0) = u;
      pi.prob(s, 1) = 1.0 - u;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      const DifferentialValues dv = exact_q(mdp, pi, i, 0.25);
      CHECK(dv.J == doctest::Approx(exact_average(mdp, pi, i, 0.25)).epsilon(1e-13));
      CHECK(std::abs(dv.mu.dot(dv.V)) < 1e-13);
      // V = sum_a pi Q and Q = C - shift - J + P V
      const Eigen::VectorXd v_from_q = pi.prob.cwiseProduct(dv.Q).rowwise().sum();
      CHECK((v_from_q - dv.V).norm() < 1e-12);
      for (std::size_t a = 0; a < 2; ++a) {
        const auto ai = static_cast<Eigen::Index>(a);
        const Eigen::VectorXd rhs = (mdp.costs[i].col(ai).array() - 0.25 - dv.J).matrix() + mdp.P[a] * dv.V;
        CHECK((rhs - dv.Q.col(ai)).norm() < 1e-12);
      }
    }
  }

  TEST_CASE("exact average matches a long simulation") {
    const TabularMdp mdp = tabular_make(3, 2, 5);
    const TabularPolicy pi = TabularPolicy::uniform(3, 2);
    TabularEnv env(mdp, Eigen::VectorXd::Constant(1, 0.5));
    Rng rng(1);
    env.reset(rng);
    double sum = 0.0;
    constexpr int kSteps = 400000;
    for (int t = 0; t < kSteps; ++t) sum += env.step(Eigen::VectorXd::Constant(1, rng.uniform()), rng).costs[0];
    CHECK(sum / kSteps == doctest::Approx(exact_average(mdp, pi, 0)).epsilon(0.01));
  }

  TEST_CASE("binned policy rows are distributions and match sampling") {
    const GaussianMlpPolicy pol = binned_net(3);
    Rng rng(2);
    const PolicyParams theta = binned_params(pol, rng);
    const BinnedGaussianPolicy bp = binned_policy(pol, theta, 3, 4);
    CHECK(((bp.table.prob.rowwise().sum().array() - 1.0).abs() < 1e-12).all());
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    x[1] = 1.0;
    Eigen::Vector4d counts = Eigen::Vector4d::Zero();
    constexpr int kDraws = 100000;
    for (int i = 0; i < kDraws; ++i) {
      const GaussianAction a = pol.sample_action(theta, x, rng);
      counts[static_cast<Eigen::Index>(action_bin(a.action[0], 4))] += 1.0;
    }
    for (Eigen::Index a = 0; a < 4; ++a)
      CHECK(counts[a] / kDraws == doctest::Approx(bp.table.prob(1, a)).epsilon(0.02).scale(0.05));
  }

  TEST_CASE("binned log-probability gradients match finite differences") {
    const GaussianMlpPolicy pol = binned_net(3);
    Rng rng(6);
    const PolicyParams theta = binned_params(pol, rng);
    const BinnedGaussianPolicy bp = binned_policy(pol, theta, 3, 2);
    for (std::size_t s = 0; s < 3; ++s)
      for (Eigen::Index a = 0; a < 2; ++a) {
        const auto f = [&](const Eigen::VectorXd& p) {
          return std::log(binned_policy(pol, p, 3, 2).table.prob(static_cast<Eigen::Index>(s), a));
        };
        const Eigen::VectorXd fd = testing::central_difference(f, theta, 1e-6);
        CHECK(testing::max_relative_error(bp.grad_log[s].row(a).transpose(), fd) < 1e-6);
      }
  }

  TEST_CASE("exact gradient matches finite differences of the exact average") {
    const TabularMdp mdp = tabular_make(3, 2, 7, 1);
    const GaussianMlpPolicy pol = binned_net(3);
    Rng rng(10);
    double worst = 0.0;
    for (int point = 0; point < 10; ++point) {
      const PolicyParams theta = binned_params(pol, rng);
      for (std::size_t i = 0; i < 2; ++i) {
        const auto J = [&](const Eigen::VectorXd& p) { return exact_average(mdp, binned_policy(pol, p, 3, 2).table, i); };
        const Eigen::VectorXd fd = testing::central_difference(J, theta, 1e-5);
        worst = std::max(worst, testing::max_relative_error(exact_gradient(mdp, pol, theta, i), fd));
      }
    }
    CHECK(worst < 1e-5);
  }

  TEST_CASE("binned policy rejects unsupported shapes") {
    const GaussianMlpPolicy pol = binned_net(3);
    const PolicyParams theta = PolicyParams::Zero(static_cast<Eigen::Index>(pol.num_params()));
    CHECK_THROWS_AS(binned_policy(pol, theta, 4, 2), ConfigError);
    CHECK_THROWS_AS(binned_policy(pol, theta, 3, 1), ConfigError);
    TabularPolicy bad = TabularPolicy::uniform(2, 2);
    CHECK_THROWS_AS(policy_transition(tabular_make(3, 2, 1), bad), ConfigError);
  }
}
