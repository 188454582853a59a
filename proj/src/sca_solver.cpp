// SPDX-License-Identifier: Apache-2.0
#include "scaopo/sca_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "scaopo/error.hpp"
#include "scaopo/kernels.hpp"

namespace scaopo {
namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

void check_models(std::span<const SurrogateModel> models) {
  if (models.empty()) throw ConfigError("surrogate list is empty");
  const Eigen::Index n = models.front().anchor.size();
  for (const SurrogateModel& m : models) {
    if (m.anchor.size() != n || m.gradient.size() != n) throw ConfigError("surrogate dimensions disagree");
    if (!(m.sigma > 0.0)) throw ConfigError("surrogate sigma must be positive");
  }
}

Eigen::VectorXd inner_minimizer_with(const kernels::KernelTable* table, std::span<const SurrogateModel> models,
                                     const Eigen::VectorXd& weights, ParamBox box) {
  check_models(models);
  if (static_cast<std::size_t>(weights.size()) != models.size()) throw ConfigError("one weight per surrogate expected");
  std::vector<const double*> grads(models.size());
  std::vector<const double*> anchors(models.size());
  std::vector<double> sigmas(models.size());
  double a = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    grads[i] = models[i].gradient.data();
    anchors[i] = models[i].anchor.data();
    sigmas[i] = models[i].sigma;
    if (weights[static_cast<Eigen::Index>(i)] < 0.0) throw ConfigError("Lagrangian weights must be nonnegative");
    a += weights[static_cast<Eigen::Index>(i)] * sigmas[i];
  }
  if (!(a > 0.0)) throw NumericError("degenerate dual: sum of weighted curvatures is zero");
  kernels::DualMinimizerInput in{grads, anchors, as_span(weights), sigmas, box.bound};
  Eigen::VectorXd out(models.front().anchor.size());
  if (table)
    table->dual_minimizer(in, out.data(), static_cast<std::size_t>(out.size()));
  else
    kernels::dual_minimizer(in, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

enum class Domain { orthant, simplex };

Eigen::VectorXd project(Domain d, const Eigen::VectorXd& v) {
  return d == Domain::orthant ? Eigen::VectorXd(v.cwiseMax(0.0)) : project_to_simplex(v);
}

// Dual function of the Lagrangian sum_i w_i model_i over the box, with
// multipliers on every model except a fixed unit-weight objective.
class LagrangianDual {
 public:
  struct Point {
    Eigen::VectorXd lambda;
    Eigen::VectorXd theta;
    Eigen::VectorXd slopes;  // d'(lambda): surrogate values of the multiplier models at theta
    double value = 0.0;
    double curvature = 0.0;  // a(lambda)
  };

  LagrangianDual(std::span<const SurrogateModel> models, bool fixed_objective, ParamBox box)
      : models_(models), offset_(fixed_objective ? 1 : 0), box_(box) {
    check_models(models);
  }

  std::size_t size() const { return models_.size() - offset_; }

  Eigen::VectorXd weights(const Eigen::VectorXd& lambda) const {
    Eigen::VectorXd w(static_cast<Eigen::Index>(models_.size()));
    if (offset_) w[0] = 1.0;
    w.tail(lambda.size()) = lambda;
    return w;
  }

  Point eval(const Eigen::VectorXd& lambda) const {
    Point p;
    p.lambda = lambda;
    const Eigen::VectorXd w = weights(lambda);
    p.theta = dual_inner_minimizer(models_, w, box_);
    p.slopes.resize(static_cast<Eigen::Index>(size()));
    p.value = 0.0;
    p.curvature = 0.0;
    for (std::size_t i = 0; i < models_.size(); ++i) {
      const double v = surrogate_eval(models_[i], p.theta);
      p.value += w[static_cast<Eigen::Index>(i)] * v;
      p.curvature += w[static_cast<Eigen::Index>(i)] * models_[i].sigma;
      if (i >= offset_) p.slopes[static_cast<Eigen::Index>(i - offset_)] = v;
    }
    return p;
  }

  // Hessian of the dual: -(1/2a) sum over unclamped coordinates of grad_i grad_k.
  Eigen::MatrixXd hessian(const Point& p) const {
    const Eigen::Index n = p.theta.size();
    const auto k = static_cast<Eigen::Index>(size());
    Eigen::MatrixXd grads(n, k);
    for (Eigen::Index i = 0; i < k; ++i)
      grads.col(i) = surrogate_gradient(models_[static_cast<std::size_t>(i) + offset_], p.theta);
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(p.theta[j]) >= box_.bound) grads.row(j).setZero();
    return -(grads.transpose() * grads) / (2.0 * p.curvature);
  }

 private:
  std::span<const SurrogateModel> models_;
  std::size_t offset_;
  ParamBox box_;
};

// Natural residual of the dual optimality conditions plus complementary slackness.
double dual_residual(Domain d, const LagrangianDual::Point& p) {
  const Eigen::VectorXd step = project(d, p.lambda + p.slopes) - p.lambda;
  double r = step.cwiseAbs().maxCoeff();
  if (d == Domain::orthant) {
    for (Eigen::Index i = 0; i < p.lambda.size(); ++i) {
      r = std::max(r, std::max(p.slopes[i], 0.0));
      r = std::max(r, std::abs(p.lambda[i] * p.slopes[i]));
    }
  } else {
    const double x = p.slopes.maxCoeff();
    for (Eigen::Index i = 0; i < p.lambda.size(); ++i) r = std::max(r, std::abs(p.lambda[i] * (p.slopes[i] - x)));
  }
  return r;
}

// Armijo search along the projection arc lambda(g) = P(lambda + g * dir).
bool arc_search(const LagrangianDual& dual, Domain d, const LagrangianDual::Point& at, const Eigen::VectorXd& dir,
                double step, LagrangianDual::Point& out) {
  constexpr double kSufficient = 1e-4;
  for (int k = 0; k < 60; ++k, step *= 0.5) {
    const Eigen::VectorXd cand = project(d, at.lambda + step * dir);
    const Eigen::VectorXd delta = cand - at.lambda;
    const double predicted = at.slopes.dot(delta);
    if (!(predicted > 0.0)) {
      if (delta.cwiseAbs().maxCoeff() == 0.0) return false;
      continue;
    }
    LagrangianDual::Point next = dual.eval(cand);
    if (next.value >= at.value + kSufficient * predicted) {
      out = std::move(next);
      return true;
    }
  }
  return false;
}

Eigen::VectorXd newton_direction(Domain d, const LagrangianDual::Point& p, const Eigen::MatrixXd& hessian) {
  const Eigen::VectorXd pg = project(d, p.lambda + p.slopes);
  std::vector<Eigen::Index> face;
  for (Eigen::Index i = 0; i < p.lambda.size(); ++i)
    if (p.lambda[i] > 0.0 || pg[i] > 0.0) face.push_back(i);
  Eigen::VectorXd dir = Eigen::VectorXd::Zero(p.lambda.size());
  if (face.empty()) return dir;
  const auto f = static_cast<Eigen::Index>(face.size());
  Eigen::MatrixXd curv(f, f);
  Eigen::VectorXd rhs(f);
  for (Eigen::Index a = 0; a < f; ++a) {
    rhs[a] = p.slopes[face[static_cast<std::size_t>(a)]];
    for (Eigen::Index b = 0; b < f; ++b) curv(a, b) = -hessian(face[static_cast<std::size_t>(a)], face[static_cast<std::size_t>(b)]);
  }
  const double reg = 1e-12 * std::max(1.0, curv.trace() / static_cast<double>(f)) + 1e-300;
  curv.diagonal().array() += reg;
  Eigen::VectorXd step;
  if (d == Domain::orthant) {
    step = curv.ldlt().solve(rhs);
  } else {
    // Newton step restricted to sum(step) = 0.
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(f + 1, f + 1);
    kkt.topLeftCorner(f, f) = curv;
    kkt.block(0, f, f, 1).setOnes();
    kkt.block(f, 0, 1, f).setOnes();
    Eigen::VectorXd r(f + 1);
    r << rhs, 0.0;
    step = kkt.fullPivLu().solve(r).head(f);
  }
  if (!step.allFinite()) return Eigen::VectorXd::Zero(p.lambda.size());
  for (Eigen::Index a = 0; a < f; ++a) dir[face[static_cast<std::size_t>(a)]] = step[a];
  return dir;
}

DualState maximize_dual(const LagrangianDual& dual, Domain d, const Eigen::VectorXd& warm, const SolverOptions& opts,
                        Eigen::VectorXd& theta_out) {
  const auto k = static_cast<Eigen::Index>(dual.size());
  Eigen::VectorXd start;
  if (warm.size() == k && warm.allFinite())
    start = project(d, warm);
  else
    start = d == Domain::orthant ? Eigen::VectorXd::Zero(k) : Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));

  LagrangianDual::Point p = dual.eval(start);
  DualState st;
  if (opts.method == DualMethod::projected_newton) {
    for (; st.iterations < opts.max_iterations; ++st.iterations) {
      if (dual_residual(d, p) <= opts.kkt_tol) break;
      const Eigen::MatrixXd h = dual.hessian(p);
      LagrangianDual::Point next;
      const Eigen::VectorXd dir = newton_direction(d, p, h);
      bool moved = dir.cwiseAbs().maxCoeff() > 0.0 && arc_search(dual, d, p, dir, 1.0, next);
      if (!moved) {
        const double lip = std::max(-h.diagonal().minCoeff(), -h.trace());
        const double step = lip > 0.0 ? 1.0 / lip : 1.0;
        moved = arc_search(dual, d, p, p.slopes, step, next);
      }
      if (!moved) break;  // no ascent representable in floating point
      p = std::move(next);
    }
  } else {
    LagrangianDual::Point best = p;
    double mark = best.value;
    std::size_t since = 0;
    for (; st.iterations < opts.max_iterations; ++st.iterations) {
      if (dual_residual(d, p) <= opts.kkt_tol) break;
      const double step = opts.step0 / std::sqrt(static_cast<double>(st.iterations) + 1.0);
      p = dual.eval(project(d, p.lambda + step * p.slopes));
      if (p.value > best.value) best = p;
      if (best.value > mark + opts.stall_tol) {
        mark = best.value;
        since = 0;
      } else if (++since >= opts.stall_window) {
        break;
      }
    }
    p = std::move(best);
  }
  st.lambda = p.lambda;
  st.dual_value = p.value;
  theta_out = p.theta;
  return st;
}

double max_value(std::span<const SurrogateModel> models, const Eigen::VectorXd& theta) {
  double v = -std::numeric_limits<double>::infinity();
  for (const SurrogateModel& m : models) v = std::max(v, surrogate_eval(m, theta));
  return v;
}

}  // namespace

double surrogate_eval(const SurrogateModel& model, const Eigen::VectorXd& theta) {
  if (theta.size() != model.anchor.size()) throw ConfigError("surrogate_eval: dimension mismatch");
  const Eigen::VectorXd d = theta - model.anchor;
  return model.value + kernels::dot(as_span(model.gradient), as_span(d)) +
         model.sigma * kernels::squared_distance(as_span(theta), as_span(model.anchor));
}

Eigen::VectorXd surrogate_gradient(const SurrogateModel& model, const Eigen::VectorXd& theta) {
  return model.gradient + 2.0 * model.sigma * (theta - model.anchor);
}

std::vector<SurrogateModel> build_surrogates(const EstimateState& est, const Eigen::VectorXd& theta_t,
                                             const Eigen::VectorXd& sigmas) {
  if (sigmas.size() != est.J_hat.size() || est.g_hat.rows() != est.J_hat.size())
    throw ConfigError("build_surrogates: need one sigma per cost function");
  if (est.g_hat.cols() != theta_t.size()) throw ConfigError("build_surrogates: gradient/parameter length mismatch");
  std::vector<SurrogateModel> models;
  models.reserve(static_cast<std::size_t>(sigmas.size()));
  for (Eigen::Index i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0)) throw ConfigError("build_surrogates: every sigma must be positive");
    models.push_back(SurrogateModel{est.J_hat[i], est.g_hat.row(i).transpose(), sigmas[i], theta_t});
  }
  return models;
}

Eigen::VectorXd dual_inner_minimizer(std::span<const SurrogateModel> models, const Eigen::VectorXd& weights,
                                     ParamBox box) {
  return inner_minimizer_with(nullptr, models, weights, box);
}

Eigen::VectorXd dual_inner_minimizer_sequential(std::span<const SurrogateModel> models,
                                                const Eigen::VectorXd& weights, ParamBox box) {
  return inner_minimizer_with(&kernels::table(kernels::Isa::scalar), models, weights, box);
}

Eigen::VectorXd dual_subgradient(std::span<const SurrogateModel> constraints, const Eigen::VectorXd& theta_circ) {
  Eigen::VectorXd s(static_cast<Eigen::Index>(constraints.size()));
  for (std::size_t i = 0; i < constraints.size(); ++i)
    s[static_cast<Eigen::Index>(i)] = surrogate_eval(constraints[i], theta_circ);
  return s;
}

double lagrangian_value(std::span<const SurrogateModel> models, const Eigen::VectorXd& weights,
                        const Eigen::VectorXd& theta) {
  double v = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) v += weights[static_cast<Eigen::Index>(i)] * surrogate_eval(models[i], theta);
  return v;
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) return v;
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) tau = t;
  }
  return (v.array() - tau).cwiseMax(0.0).matrix();
}

double kkt_residual(std::span<const SurrogateModel> models, UpdateKind kind, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& lambda, ParamBox box) {
  const std::size_t offset = kind == UpdateKind::objective ? 1 : 0;
  if (static_cast<std::size_t>(lambda.size()) + offset != models.size())
    throw ConfigError("kkt_residual: one multiplier per constraint expected");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
  if (offset) grad += surrogate_gradient(models[0], theta);
  for (Eigen::Index i = 0; i < lambda.size(); ++i)
    grad += lambda[i] * surrogate_gradient(models[static_cast<std::size_t>(i) + offset], theta);
  const Eigen::VectorXd moved = (theta - grad).cwiseMax(-box.bound).cwiseMin(box.bound);
  double r = (theta - moved).cwiseAbs().maxCoeff();
  if (lambda.size()) r = std::max(r, -lambda.minCoeff());
  const Eigen::VectorXd vals = dual_subgradient(models.subspan(offset), theta);
  if (kind == UpdateKind::objective) {
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      r = std::max(r, std::max(vals[i], 0.0));
      r = std::max(r, std::abs(lambda[i] * vals[i]));
    }
  } else {
    const double x = vals.maxCoeff();
    r = std::max(r, std::abs(lambda.sum() - 1.0));
    for (Eigen::Index i = 0; i < lambda.size(); ++i) r = std::max(r, std::abs(lambda[i] * (vals[i] - x)));
  }
  return r;
}

SubproblemSolution solve_objective_update(std::span<const SurrogateModel> models, ParamBox box,
                                          const SolverOptions& opts, const Eigen::VectorXd& warm) {
  check_models(models);
  SubproblemSolution sol;
  sol.kind = UpdateKind::objective;
  const LagrangianDual dual(models, true, box);
  if (dual.size() == 0) {
    sol.theta_bar = dual_inner_minimizer(models, Eigen::VectorXd::Ones(1), box);
    sol.dual.lambda = Eigen::VectorXd(0);
    sol.dual.dual_value = surrogate_eval(models[0], sol.theta_bar);
    sol.violation = -std::numeric_limits<double>::infinity();
  } else {
    sol.dual = maximize_dual(dual, Domain::orthant, warm, opts, sol.theta_bar);
    sol.violation = max_value(models.subspan(1), sol.theta_bar);
  }
  sol.dual.gap = surrogate_eval(models[0], sol.theta_bar) - sol.dual.dual_value;
  sol.kkt_residual = kkt_residual(models, UpdateKind::objective, sol.theta_bar, sol.dual.lambda, box);
  return sol;
}

SubproblemSolution solve_feasible_update(std::span<const SurrogateModel> constraints, ParamBox box,
                                         const SolverOptions& opts, const Eigen::VectorXd& warm) {
  check_models(constraints);
  SubproblemSolution sol;
  sol.kind = UpdateKind::feasible;
  const LagrangianDual dual(constraints, false, box);
  sol.dual = maximize_dual(dual, Domain::simplex, warm, opts, sol.theta_bar);
  sol.violation = max_value(constraints, sol.theta_bar);
  sol.dual.gap = sol.violation - sol.dual.dual_value;
  sol.kkt_residual = kkt_residual(constraints, UpdateKind::feasible, sol.theta_bar, sol.dual.lambda, box);
  return sol;
}

double feasibility_tolerance(std::span<const SurrogateModel> models, const SolverOptions& opts) {
  double scale = 1.0;
  for (const SurrogateModel& m : models) scale = std::max(scale, std::abs(m.value));
  return opts.feas_tol * scale;
}

SubproblemSolution solve_sca_subproblem(std::span<const SurrogateModel> models, ParamBox box,
                                        const SolverOptions& opts, DualWarmStart& warm) {
  check_models(models);
  if (models.size() == 1) return solve_objective_update(models, box, opts);
  const double tol = feasibility_tolerance(models, opts);
  SubproblemSolution feas = solve_feasible_update(models.subspan(1), box, opts, warm.feasible);
  warm.feasible = feas.dual.lambda;
  if (feas.violation > tol) return feas;
  SubproblemSolution obj = solve_objective_update(models, box, opts, warm.objective);
  if (obj.violation <= 2.0 * tol) {
    warm.objective = obj.dual.lambda;
    return obj;
  }
  return feas;
}

}  // namespace scaopo
