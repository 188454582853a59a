// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "fd_oracle.hpp"
#include "scaopo/error.hpp"
#include "scaopo/mlp_policy.hpp"
#include "test_util.hpp"

using namespace scaopo;
using namespace scaopo::testing;

namespace {

GaussianMlpPolicy small_policy(std::size_t in = 3, std::size_t out = 2, std::vector<std::size_t> hidden = {5, 4}) {
  MlpArch arch;
  arch.input_dim = in;
  arch.hidden_dims = std::move(hidden);
  arch.output_dim = out;
  return GaussianMlpPolicy(arch, ActionBox::uniform(static_cast<Eigen::Index>(out), -2.0, 3.0));
}

PolicyParams random_params(const GaussianMlpPolicy& pol, Rng& rng) {
  PolicyParams p = random_vector(rng, static_cast<Eigen::Index>(pol.num_params()), -1.0, 1.0);
  p.tail(static_cast<Eigen::Index>(pol.action_dim())) = random_vector(rng, static_cast<Eigen::Index>(pol.action_dim()), -1.0, 0.5);
  return p;
}

}  // namespace

TEST_SUITE("mlp_policy") {
  TEST_CASE("parameter layout and round trip") {
    const GaussianMlpPolicy pol = small_policy();
    CHECK(pol.num_params() == (3 * 5 + 5) + (5 * 4 + 4) + (4 * 2 + 2) + 2);
    CHECK(pol.log_std_offset() == pol.num_params() - 2);
    Rng rng(1);
    for (int rep = 0; rep < 10; ++rep) {
      const PolicyParams p = random_params(pol, rng);
      const UnpackedParams u = pol.unflatten(p);
      REQUIRE(u.layers.size() == 3);
      CHECK(u.layers[0].weights.rows() == 5);
      CHECK(u.layers[0].weights.cols() == 3);
      CHECK(bitwise_equal(pol.flatten(u), p));
    }
    // Weights are row-major per layer.
    PolicyParams p = PolicyParams::Zero(static_cast<Eigen::Index>(pol.num_params()));
    p[1] = 7.0;
    CHECK(pol.unflatten(p).layers[0].weights(0, 1) == 7.0);
  }

  TEST_CASE("forward_mean examples") {
    const GaussianMlpPolicy pol = small_policy();
    Rng rng(2);
    const Eigen::VectorXd s = random_vector(rng, 3);
    PolicyParams zero = PolicyParams::Zero(static_cast<Eigen::Index>(pol.num_params()));
    CHECK(pol.forward_mean(zero, s).isApprox(Eigen::VectorXd::Constant(2, 0.5)));
    // Zero output layer with random hidden layers.
    PolicyParams p = random_params(pol, rng);
    UnpackedParams u = pol.unflatten(p);
    u.layers.back().weights.setZero();
    u.layers.back().bias.setZero();
    CHECK((pol.forward_mean(pol.flatten(u), s).array() == 0.5).all());
    // Mean action rescales into the box.
    CHECK(pol.mean_action(zero, s).isApprox(Eigen::VectorXd::Constant(2, 0.5)));
    for (int rep = 0; rep < 20; ++rep) {
      const PolicyParams q = random_params(pol, rng);
      const Eigen::VectorXd x = random_vector(rng, 3, -2.0, 2.0);
      const Eigen::VectorXd expect = naive_forward(pol.arch(), q, x);
      CHECK(rel_error(pol.forward_mean(q, x), expect) < 1e-14);
      CHECK(((pol.forward_mean(q, x).array() > 0.0) && (pol.forward_mean(q, x).array() < 1.0)).all());
      const Eigen::VectorXd box_mean = -2.0 + 5.0 * expect.array();
      CHECK(rel_error(pol.mean_action(q, x), box_mean) < 1e-14);
    }
  }

  TEST_CASE("dimension mismatches are configuration errors") {
    const GaussianMlpPolicy pol = small_policy();
    const PolicyParams p = PolicyParams::Zero(static_cast<Eigen::Index>(pol.num_params()));
    CHECK_THROWS_AS(pol.forward_mean(p, Eigen::VectorXd::Zero(4)), ConfigError);
    CHECK_THROWS_AS(pol.forward_mean(PolicyParams::Zero(3), Eigen::VectorXd::Zero(3)), ConfigError);
    CHECK_THROWS_AS(pol.grad_log_prob(p, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(5)), ConfigError);
    MlpArch bad;
    bad.input_dim = 2;
    bad.output_dim = 2;
    CHECK_THROWS_AS(GaussianMlpPolicy(bad, ActionBox::uniform(3, 0.0, 1.0)), ConfigError);
  }

  TEST_CASE("sample_action") {
    const GaussianMlpPolicy pol = small_policy();
    Rng rng(3);
    PolicyParams p = random_params(pol, rng);
    const Eigen::VectorXd s = random_vector(rng, 3);

    SUBCASE("degenerate std returns the mean") {
      PolicyParams q = p;
      q.tail(2).setConstant(-20.0);
      Rng r(5);
      const GaussianAction a = pol.sample_action(q, s, r);
      CHECK((a.action - pol.mean_action(q, s)).cwiseAbs().maxCoeff() < 1e-6);
    }
    SUBCASE("deterministic under a seed and log_prob matches the density") {
      Rng r1(9), r2(9);
      const GaussianAction a = pol.sample_action(p, s, r1);
      const GaussianAction b = pol.sample_action(p, s, r2);
      CHECK(bitwise_equal(a.raw, b.raw));
      CHECK(a.log_prob == b.log_prob);
      CHECK(a.log_prob == doctest::Approx(pol.log_prob(p, s, a.raw)).epsilon(1e-12));
      CHECK(pol.action_box().contains(a.action));
      CHECK(a.action.isApprox(pol.action_box().clip(a.raw)));
    }
    SUBCASE("empirical mean of the raw samples") {
      const int n = 100000;
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
      Rng r(10);
      for (int i = 0; i < n; ++i) sum += pol.sample_action(p, s, r).raw;
      const Eigen::VectorXd sd = p.tail(2).array().exp();
      const Eigen::VectorXd err = (sum / n - pol.mean_action(p, s)).cwiseAbs();
      for (Eigen::Index k = 0; k < 2; ++k) CHECK(err[k] < 3.0 * sd[k] / std::sqrt(double(n)));
    }
  }

  TEST_CASE("grad_log_prob at the mean") {
    const GaussianMlpPolicy pol = small_policy();
    Rng rng(4);
    const PolicyParams p = random_params(pol, rng);
    const Eigen::VectorXd s = random_vector(rng, 3);
    const Eigen::VectorXd g = pol.grad_log_prob(p, s, pol.mean_action(p, s));
    CHECK(g.head(static_cast<Eigen::Index>(pol.log_std_offset())).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.tail(2).isApprox(Eigen::VectorXd::Constant(2, -1.0)));
  }

  TEST_CASE("grad_log_prob of a one-weight linear network") {
    // mean = w s + b, identity activations, no hidden layers.
    MlpArch arch;
    arch.input_dim = 1;
    arch.hidden_dims = {};
    arch.output_dim = 1;
    arch.hidden = HiddenActivation::identity;
    arch.output = OutputActivation::identity;
    const GaussianMlpPolicy pol(arch, ActionBox::uniform(1, -10.0, 10.0));
    REQUIRE(pol.num_params() == 3);
    const double w = 0.7, b = -0.3, ls = std::log(0.5), s = 1.5, a = 2.0;
    PolicyParams p(3);
    p << w, b, ls;
    const double mu = w * s + b, var = 0.25;
    const Eigen::VectorXd g = pol.grad_log_prob(p, Eigen::VectorXd::Constant(1, s), Eigen::VectorXd::Constant(1, a));
    CHECK(g[0] == doctest::Approx((a - mu) / var * s));
    CHECK(g[1] == doctest::Approx((a - mu) / var));
    CHECK(g[2] == doctest::Approx((a - mu) * (a - mu) / var - 1.0));
  }

  TEST_CASE("grad_log_prob matches central differences") {
    const GaussianMlpPolicy pol = small_policy(4, 2, {16, 16});
    Rng rng(5);
    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
      const PolicyParams p = random_params(pol, rng);
      const Eigen::VectorXd s = random_vector(rng, 4);
      Rng r(100 + static_cast<std::uint64_t>(rep));
      const Eigen::VectorXd a = pol.sample_action(p, s, r).raw;
      const Eigen::VectorXd fd =
          central_difference([&](const Eigen::VectorXd& q) { return pol.log_prob(q, s, a); }, p);
      worst = std::max(worst, max_relative_error(pol.grad_log_prob(p, s, a), fd));
    }
    CHECK(worst < 1e-4);
  }

  TEST_CASE("score function has zero mean without clipping") {
    const GaussianMlpPolicy pol = small_policy(2, 1, {3});
    Rng rng(6);
    const PolicyParams p = random_params(pol, rng);
    const Eigen::VectorXd s = random_vector(rng, 2);
    const int n = 100000;
    const auto np = static_cast<Eigen::Index>(pol.num_params());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(np), sq = Eigen::VectorXd::Zero(np);
    Rng r(7);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd g = pol.grad_log_prob(p, s, pol.sample_action(p, s, r).raw);
      sum += g;
      sq += g.cwiseProduct(g);
    }
    const Eigen::VectorXd mean = sum / n;
    const Eigen::VectorXd se = ((sq / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
    CHECK(mean.norm() < 5.0 * se.norm());
  }

  TEST_CASE("initial parameters") {
    const GaussianMlpPolicy pol = small_policy();
    Rng rng(8);
    const PolicyParams p = pol.initial_params(rng);
    CHECK(p.tail(2).isApprox((0.25 * Eigen::VectorXd::Constant(2, 5.0)).array().log().matrix()));
    const UnpackedParams u = pol.unflatten(p);
    CHECK(u.layers[0].weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(3.0));
    CHECK(u.layers[1].weights.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(5.0));
    CHECK(u.layers[0].bias.isZero());
    Rng again(8);
    CHECK(bitwise_equal(pol.initial_params(again), p));
  }

  TEST_CASE("project_to_box") {
    Rng rng(9);
    const Eigen::VectorXd inside = random_vector(rng, 30, -2.0, 2.0);
    CHECK(bitwise_equal(project_to_box(inside, 2.0), inside));
    Eigen::VectorXd v(2);
    v << 4.0, -4.0;
    CHECK(project_to_box(v, 2.0) == Eigen::Vector2d(2.0, -2.0));
    for (int rep = 0; rep < 50; ++rep) {
      const Eigen::VectorXd x = random_vector(rng, 30, -5.0, 5.0);
      const Eigen::VectorXd y = random_vector(rng, 30, -5.0, 5.0);
      const Eigen::VectorXd px = project_to_box(x, 2.0);
      CHECK(bitwise_equal(project_to_box(px, 2.0), px));
      CHECK((px - project_to_box(y, 2.0)).norm() <= (x - y).norm());
      CHECK(px.cwiseAbs().maxCoeff() <= 2.0);
    }
  }
}
