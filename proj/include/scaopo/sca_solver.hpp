// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scaopo/box.hpp"
#include "scaopo/offpolicy_estimator.hpp"

namespace scaopo {

/// Strongly convex quadratic model anchored at theta_t:
///   value + gradient.(theta - anchor) + sigma |theta - anchor|^2.
struct SurrogateModel {
  double value = 0.0;
  Eigen::VectorXd gradient;
  double sigma = 1.0;
  Eigen::VectorXd anchor;
};

double surrogate_eval(const SurrogateModel& model, const Eigen::VectorXd& theta);
Eigen::VectorXd surrogate_gradient(const SurrogateModel& model, const Eigen::VectorXd& theta);

/// model_i = (J_hat_i, g_hat_i, sigma_i, theta_t) for i = 0..m.
std::vector<SurrogateModel> build_surrogates(const EstimateState& est, const Eigen::VectorXd& theta_t,
                                             const Eigen::VectorXd& sigmas);

/// Minimizer over the box of sum_i weights_i * model_i(theta), one weight per
/// model. Throws NumericError when sum_i weights_i sigma_i is not positive.
Eigen::VectorXd dual_inner_minimizer(std::span<const SurrogateModel> models, const Eigen::VectorXd& weights,
                                     ParamBox box);

/// Same minimizer evaluated with the scalar reference kernel regardless of the dispatched ISA.
Eigen::VectorXd dual_inner_minimizer_sequential(std::span<const SurrogateModel> models,
                                                const Eigen::VectorXd& weights, ParamBox box);

/// [model_1(theta), ..., model_m(theta)]: a subgradient of the dual function
/// when theta is the inner minimizer for the queried multipliers.
Eigen::VectorXd dual_subgradient(std::span<const SurrogateModel> constraints, const Eigen::VectorXd& theta_circ);

/// sum_i weights_i * model_i(theta)
double lagrangian_value(std::span<const SurrogateModel> models, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& theta);

enum class UpdateKind { objective, feasible };

enum class DualMethod {
  projected_newton,  // face-restricted Newton steps with Armijo search along the projection arc
  subgradient,       // projected subgradient ascent, steps step0 / sqrt(k + 1)
};

struct SolverOptions {
  DualMethod method = DualMethod::projected_newton;
  std::size_t max_iterations = 2000;
  double kkt_tol = 1e-10;     // stop once the KKT residual drops below this
  double feas_tol = 1e-8;     // relative; scaled by max(1, max_i |J_hat_i|)
  double step0 = 1.0;         // subgradient method only
  double stall_tol = 1e-10;   // subgradient method: stop if best dual value
  std::size_t stall_window = 100;  // improves by less than stall_tol over this many steps
};

/// Multipliers and diagnostics of one dual solve.
struct DualState {
  Eigen::VectorXd lambda;
  std::size_t iterations = 0;
  double dual_value = 0.0;
  double gap = 0.0;  // primal value at theta_bar minus dual value
};

struct SubproblemSolution {
  Eigen::VectorXd theta_bar;
  UpdateKind kind = UpdateKind::objective;
  double violation = 0.0;     // max_i model_i(theta_bar), i >= 1
  double kkt_residual = 0.0;  // max of stationarity, feasibility and complementary slackness residuals
  DualState dual;
};

/// Warm starts carried across SCA iterations.
struct DualWarmStart {
  Eigen::VectorXd objective;  // lambda in R_+^m
  Eigen::VectorXd feasible;   // lambda in the simplex
};

/// min model_0 s.t. model_i <= 0 (i >= 1), theta in the box; models has m+1 entries.
SubproblemSolution solve_objective_update(std::span<const SurrogateModel> models, ParamBox box,
                                          const SolverOptions& opts, const Eigen::VectorXd& warm = {});

/// min x s.t. model_i <= x over the constraint models only (m >= 1).
SubproblemSolution solve_feasible_update(std::span<const SurrogateModel> constraints, ParamBox box,
                                         const SolverOptions& opts, const Eigen::VectorXd& warm = {});

/// Feasibility tolerance for the verdict on the objective update.
double feasibility_tolerance(std::span<const SurrogateModel> models, const SolverOptions& opts);

/// Solves the feasible update first; when its optimal violation is within
/// tolerance the objective update is solved and returned (provided its own
/// violation stays within twice the tolerance), otherwise the feasible update
/// is. Updates the warm starts in place.
SubproblemSolution solve_sca_subproblem(std::span<const SurrogateModel> models, ParamBox box,
                                        const SolverOptions& opts, DualWarmStart& warm);

/// KKT residual of (theta, lambda) for either update kind. For the objective
/// kind models holds all m+1 models; for the feasible kind only the constraints.
double kkt_residual(std::span<const SurrogateModel> models, UpdateKind kind, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& lambda, ParamBox box);

/// Euclidean projection onto the probability simplex (sort and threshold).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

}  // namespace scaopo
