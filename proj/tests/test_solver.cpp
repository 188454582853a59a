// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "qp_oracle.hpp"
#include "scaopo/error.hpp"
#include "scaopo/kernels.hpp"
#include "scaopo/sca_solver.hpp"
#include "test_util.hpp"

using namespace scaopo;
using namespace scaopo::testing;

namespace {

SurrogateModel model(double value, Eigen::VectorXd g, double sigma, Eigen::VectorXd anchor) {
  return {value, std::move(g), sigma, std::move(anchor)};
}

SurrogateModel scalar_model(double value, double g, double sigma, double anchor = 0.0) {
  return model(value, Eigen::VectorXd::Constant(1, g), sigma, Eigen::VectorXd::Constant(1, anchor));
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("surrogate evaluation") {
    Rng rng(1);
    const SurrogateModel m = random_model(rng, 6, 2.0, -1.0, 1.0);
    CHECK(surrogate_eval(m, m.anchor) == m.value);
    const SurrogateModel flat = model(3.0, Eigen::VectorXd::Zero(3), 1.0, Eigen::VectorXd::Zero(3));
    CHECK(surrogate_eval(flat, Eigen::Vector3d(1, 0, 0)) == doctest::Approx(4.0));
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd th = random_vector(rng, 6, -2.0, 2.0);
      CHECK(surrogate_eval(m, th) == doctest::Approx(model_value(m, th)).epsilon(1e-13));
      CHECK(rel_error(surrogate_gradient(m, th), model_grad(m, th)) < 1e-14);
      // Strong convexity along random chords.
      const Eigen::VectorXd a = random_vector(rng, 6, -2.0, 2.0), b = random_vector(rng, 6, -2.0, 2.0);
      const double mid = surrogate_eval(m, 0.5 * (a + b));
      const double avg = 0.5 * (surrogate_eval(m, a) + surrogate_eval(m, b));
      CHECK(mid <= avg - m.sigma * (a - b).squaredNorm() / 4.0 + 1e-12);
    }
  }

  TEST_CASE("build_surrogates") {
    EstimateState est;
    est.J_hat = Eigen::Vector2d(1.5, -0.5);
    est.g_hat = GradientMatrix::Random(2, 4);
    const Eigen::VectorXd th = Eigen::VectorXd::LinSpaced(4, -1.0, 1.0);
    const auto ms = build_surrogates(est, th, Eigen::Vector2d(1.0, 10.0));
    REQUIRE(ms.size() == 2);
    CHECK(surrogate_eval(ms[0], th) == 1.5);
    CHECK(surrogate_eval(ms[1], th) == -0.5);
    CHECK(ms[1].sigma == 10.0);
    CHECK(ms[1].gradient == est.g_hat.row(1).transpose());
    CHECK_THROWS_AS(build_surrogates(est, th, Eigen::Vector2d(1.0, 0.0)), ConfigError);
    CHECK_THROWS_AS(build_surrogates(est, th, Eigen::VectorXd::Ones(3)), ConfigError);
  }

  TEST_CASE("dual inner minimizer") {
    SUBCASE("unconstrained minimum and clamp") {
      const SurrogateModel m0 = model(0.0, Eigen::Vector2d(1.0, -2.0), 0.5, Eigen::Vector2d(0.5, 0.5));
      const std::vector<SurrogateModel> ms{m0};
      const Eigen::VectorXd th = dual_inner_minimizer(ms, Eigen::VectorXd::Ones(1), ParamBox{10.0});
      CHECK(rel_error(th, Eigen::Vector2d(0.5 - 1.0, 0.5 + 2.0)) < 1e-15);
      const Eigen::VectorXd clamped = dual_inner_minimizer(ms, Eigen::VectorXd::Ones(1), ParamBox{1.0});
      CHECK(clamped == Eigen::Vector2d(-0.5, 1.0));
      const SurrogateModel far = model(0.0, Eigen::VectorXd::Constant(3, -8.0), 1.0, Eigen::VectorXd::Zero(3));
      CHECK(dual_inner_minimizer(std::vector{far}, Eigen::VectorXd::Ones(1), ParamBox{2.0}) ==
            Eigen::VectorXd::Constant(3, 2.0));
    }
    SUBCASE("degenerate weights") {
      Rng rng(2);
      const std::vector<SurrogateModel> ms{random_model(rng, 3, 1.0, 0, 1), random_model(rng, 3, 1.0, 0, 1)};
      CHECK_THROWS_AS(dual_inner_minimizer(ms, Eigen::Vector2d(0.0, 0.0), ParamBox{1.0}), NumericError);
    }
    SUBCASE("matches the projected-gradient oracle, sequential equals dispatched") {
      Rng rng(3);
      double worst = 0.0;
      bool bitwise = true;
      for (int rep = 0; rep < 200; ++rep) {
        const std::size_t m = 1 + rep % 4;
        const Eigen::Index n = 20;
        std::vector<SurrogateModel> ms;
        for (std::size_t i = 0; i < m; ++i) ms.push_back(random_model(rng, n, 1.0, -1.0, 1.0));
        Eigen::VectorXd w = random_vector(rng, static_cast<Eigen::Index>(m), 0.0, 2.0);
        w[0] += 0.05;
        const Eigen::VectorXd got = dual_inner_minimizer(ms, w, ParamBox{1.0});
        worst = std::max(worst, (got - lagrangian_pg_oracle(ms, w, 1.0)).cwiseAbs().maxCoeff());
        bitwise = bitwise && bitwise_equal(got, dual_inner_minimizer_sequential(ms, w, ParamBox{1.0}));
      }
      CHECK(worst < 1e-8);
      CHECK(bitwise);
    }
  }

  TEST_CASE("dual subgradient") {
    SUBCASE("strictly satisfied constraints give negative entries") {
      const std::vector<SurrogateModel> cons{scalar_model(-1.0, 0.0, 1.0), scalar_model(-2.0, 0.1, 1.0)};
      const Eigen::VectorXd s = dual_subgradient(cons, Eigen::VectorXd::Zero(1));
      CHECK((s.array() < 0.0).all());
    }
    SUBCASE("matches the analytic derivative of a one-constraint dual") {
      // model_0 = theta^2, model_1 = 1 - 4 theta + theta^2 on a wide box.
      // theta(l) = 2 l / (1 + l); d(l) = theta^2 (1 + l) + l (1 - 4 theta); d'(l) = model_1(theta(l)).
      const std::vector<SurrogateModel> ms{scalar_model(0.0, 0.0, 1.0), scalar_model(1.0, -4.0, 1.0)};
      for (double l : {0.1, 0.5, 1.0, 3.0}) {
        const Eigen::VectorXd th = dual_inner_minimizer(ms, Eigen::Vector2d(1.0, l), ParamBox{10.0});
        CHECK(th[0] == doctest::Approx(2.0 * l / (1.0 + l)));
        auto d = [&](double lam) {
          const double t = 2.0 * lam / (1.0 + lam);
          return t * t * (1.0 + lam) + lam * (1.0 - 4.0 * t);
        };
        const double fd = (d(l + 1e-6) - d(l - 1e-6)) / 2e-6;
        CHECK(dual_subgradient(std::span(ms).subspan(1), th)[0] == doctest::Approx(fd).epsilon(1e-7));
      }
    }
    SUBCASE("subgradient inequality and concavity of the dual") {
      Rng rng(4);
      for (int rep = 0; rep < 50; ++rep) {
        const auto ms = random_instance(rng, 8, 3, 1.0, false);
        auto dual = [&](const Eigen::VectorXd& lam) {
          Eigen::VectorXd w(4);
          w << 1.0, lam;
          return lagrangian_value(ms, w, dual_inner_minimizer(ms, w, ParamBox{1.0}));
        };
        const Eigen::VectorXd l1 = random_vector(rng, 3, 0.0, 3.0), l2 = random_vector(rng, 3, 0.0, 3.0);
        Eigen::VectorXd w1(4);
        w1 << 1.0, l1;
        const Eigen::VectorXd s = dual_subgradient(std::span(ms).subspan(1), dual_inner_minimizer(ms, w1, ParamBox{1.0}));
        CHECK(dual(l2) <= dual(l1) + s.dot(l2 - l1) + 1e-10);
        CHECK(dual(0.5 * (l1 + l2)) >= 0.5 * (dual(l1) + dual(l2)) - 1e-10);
      }
    }
  }

  TEST_CASE("simplex projection") {
    CHECK(project_to_simplex(Eigen::Vector3d(0.2, 0.3, 0.5)).isApprox(Eigen::Vector3d(0.2, 0.3, 0.5)));
    CHECK(project_to_simplex(Eigen::Vector3d(5.0, 0.0, 0.0)) == Eigen::Vector3d(1.0, 0.0, 0.0));
    CHECK(project_to_simplex(Eigen::Vector2d(1.0, 1.0)).isApprox(Eigen::Vector2d(0.5, 0.5)));
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
      const Eigen::VectorXd v = random_vector(rng, 5, -2.0, 2.0);
      const Eigen::VectorXd p = project_to_simplex(v);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(p.minCoeff() >= 0.0);
      // Variational inequality: (v - p).(q - p) <= 0 for simplex points q.
      for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd q = Eigen::VectorXd::Zero(5);
        q[k] = 1.0;
        CHECK((v - p).dot(q - p) <= 1e-12);
      }
    }
  }

  TEST_CASE("objective update examples") {
    SolverOptions opts;
    SUBCASE("inactive constraints") {
      const std::vector<SurrogateModel> ms{scalar_model(0.0, 1.0, 1.0, 0.2), scalar_model(-5.0, 0.0, 1.0, 0.2)};
      const SubproblemSolution s = solve_objective_update(ms, ParamBox{10.0}, opts);
      CHECK(s.theta_bar[0] == doctest::Approx(0.2 - 0.5));
      CHECK(s.dual.lambda[0] == 0.0);
      CHECK(s.kind == UpdateKind::objective);
    }
    SUBCASE("one active constraint, hand-solved KKT") {
      // min theta^2 s.t. theta^2 - 4 theta + 1 <= 0: theta* = 2 - sqrt 3, lambda* = theta* / (2 - theta*).
      const std::vector<SurrogateModel> ms{scalar_model(0.0, 0.0, 1.0), scalar_model(1.0, -4.0, 1.0)};
      const SubproblemSolution s = solve_objective_update(ms, ParamBox{10.0}, opts);
      const double th = 2.0 - std::sqrt(3.0);
      CHECK(std::abs(s.theta_bar[0] - th) < 1e-6);
      CHECK(std::abs(s.dual.lambda[0] - th / (2.0 - th)) < 1e-6);
      CHECK(s.kkt_residual < 1e-6);
    }
    SUBCASE("no constraints") {
      const std::vector<SurrogateModel> ms{model(0.0, Eigen::Vector2d(4.0, -1.0), 2.0, Eigen::Vector2d::Zero())};
      const SubproblemSolution s = solve_objective_update(ms, ParamBox{0.5}, opts);
      CHECK(s.theta_bar == Eigen::Vector2d(-0.5, 0.25));
    }
  }

  TEST_CASE("feasible update examples") {
    SolverOptions opts;
    SUBCASE("single constraint") {
      const std::vector<SurrogateModel> cons{model(0.3, Eigen::Vector2d(2.0, -6.0), 1.0, Eigen::Vector2d(0.1, 0.0))};
      const SubproblemSolution s = solve_feasible_update(cons, ParamBox{2.0}, opts);
      const Eigen::Vector2d expect = Eigen::Vector2d(0.1 - 1.0, 2.0);
      CHECK(rel_error(s.theta_bar, expect) < 1e-12);
      CHECK(s.violation == doctest::Approx(model_value(cons[0], expect)));
      CHECK(s.kind == UpdateKind::feasible);
    }
    SUBCASE("identical constraints behave like one") {
      const SurrogateModel c = model(0.3, Eigen::Vector2d(2.0, -1.0), 1.5, Eigen::Vector2d(0.1, 0.0));
      const SubproblemSolution one = solve_feasible_update(std::vector{c}, ParamBox{2.0}, opts);
      const SubproblemSolution two = solve_feasible_update(std::vector{c, c}, ParamBox{2.0}, opts);
      CHECK(rel_error(one.theta_bar, two.theta_bar) < 1e-9);
      CHECK(two.dual.lambda.sum() == doctest::Approx(1.0));
    }
    SUBCASE("needs at least one constraint") {
      CHECK_THROWS(solve_feasible_update(std::vector<SurrogateModel>{}, ParamBox{1.0}, opts));
    }
  }

  TEST_CASE("random subproblems against the barrier oracle") {
    SolverOptions opts;
    Rng rng(6);
    const double bound = 2.0;
    int objective_cases = 0;
    for (int rep = 0; rep < 40; ++rep) {
      const auto ms = random_instance(rng, 30, 3, bound, rep % 2 == 0);
      const std::span<const SurrogateModel> cons = std::span(ms).subspan(1);
      const BarrierOracle oracle(cons, bound);

      const SubproblemSolution f = solve_feasible_update(cons, ParamBox{bound}, opts);
      const BarrierResult fo = oracle.feasible();
      CHECK(std::abs(f.violation - fo.value) < 1e-6);
      CHECK(f.dual.lambda.minCoeff() >= 0.0);
      CHECK(f.dual.lambda.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(stationarity(cons, f.dual.lambda, f.theta_bar, bound) < 1e-6);
      for (std::size_t i = 0; i < cons.size(); ++i)
        CHECK(std::abs(f.dual.lambda[static_cast<Eigen::Index>(i)] * (model_value(cons[i], f.theta_bar) - f.violation)) < 1e-6);

      if (!(fo.value < -1e-6)) continue;
      ++objective_cases;
      const SubproblemSolution o = solve_objective_update(ms, ParamBox{bound}, opts, {});
      const BarrierResult oo = oracle.objective(ms[0]);
      REQUIRE(!std::isnan(oo.value));
      CHECK(std::abs(model_value(ms[0], o.theta_bar) - oo.value) < 1e-6);
      Eigen::VectorXd w(4);
      w << 1.0, o.dual.lambda;
      CHECK(stationarity(ms, w, o.theta_bar, bound) < 1e-6);
      for (std::size_t i = 0; i < cons.size(); ++i) {
        CHECK(model_value(cons[i], o.theta_bar) <= 2.0 * feasibility_tolerance(ms, opts));
        CHECK(std::abs(o.dual.lambda[static_cast<Eigen::Index>(i)] * model_value(cons[i], o.theta_bar)) < 1e-6);
      }
      CHECK(o.kkt_residual < 1e-6);
      // The objective update never does worse on model_0 than the fallback.
      CHECK(model_value(ms[0], o.theta_bar) <= model_value(ms[0], f.theta_bar) + 1e-9);
    }
    CHECK(objective_cases >= 10);
  }

  TEST_CASE("combined subproblem picks the update by feasibility") {
    SolverOptions opts;
    DualWarmStart warm;
    // Infeasible: the constraint's minimum over the box is positive.
    const std::vector<SurrogateModel> bad{scalar_model(0.0, 1.0, 1.0), scalar_model(5.0, 0.0, 1.0)};
    const SubproblemSolution s1 = solve_sca_subproblem(bad, ParamBox{1.0}, opts, warm);
    CHECK(s1.kind == UpdateKind::feasible);
    CHECK(s1.violation == doctest::Approx(5.0));
    const std::vector<SurrogateModel> good{scalar_model(0.0, 1.0, 1.0), scalar_model(1.0, -4.0, 1.0)};
    const SubproblemSolution s2 = solve_sca_subproblem(good, ParamBox{10.0}, opts, warm);
    CHECK(s2.kind == UpdateKind::objective);
    CHECK(warm.objective.size() == 1);
  }

  TEST_CASE("subgradient dual method agrees with the default") {
    SolverOptions newton, sub;
    sub.method = DualMethod::subgradient;
    sub.max_iterations = 20000;
    Rng rng(7);
    for (int rep = 0; rep < 5; ++rep) {
      const auto ms = random_instance(rng, 10, 2, 2.0, true);
      const SubproblemSolution a = solve_objective_update(ms, ParamBox{2.0}, newton);
      const SubproblemSolution b = solve_objective_update(ms, ParamBox{2.0}, sub);
      CHECK(std::abs(model_value(ms[0], a.theta_bar) - model_value(ms[0], b.theta_bar)) < 1e-3);
    }
  }
}
