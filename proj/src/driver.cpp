// SPDX-License-Identifier: Apache-2.0
#include "scaopo/driver.hpp"

#include <chrono>
#include <cmath>

#include "scaopo/error.hpp"
#include "scaopo/kernels.hpp"

namespace scaopo {
namespace {

std::span<double> as_span(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> as_cspan(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

DriverConfig checked(DriverConfig config, const Environment& env) {
  config.validate(env.spec().num_constraints + 1);
  return config;
}

nlohmann::json experience_to_json(const Experience& e) {
  return {vector_to_json(e.state), vector_to_json(e.action), vector_to_json(e.shifted_costs)};
}

}  // namespace

std::vector<std::string> StepSchedule::violations() const {
  std::vector<std::string> out;
  if (!(kappa1 > 0.5 && kappa1 < 1.0)) out.emplace_back("kappa1 must lie in (0.5, 1)");
  if (!(kappa2 > 0.5 && kappa2 <= 1.0)) out.emplace_back("kappa2 must lie in (0.5, 1]");
  if (!(kappa1 < kappa2)) out.emplace_back("kappa1 must be < kappa2 (the policy step must decay faster than the estimate step)");
  if (!(beta0 > 0.0 && beta0 <= 1.0)) out.emplace_back("beta0 must lie in (0, 1]");
  if (beta_fixed && !(*beta_fixed >= 0.0 && *beta_fixed <= 1.0)) out.emplace_back("beta_fixed must lie in [0, 1]");
  return out;
}

void StepSchedule::validate() const {
  const auto v = violations();
  if (!v.empty()) throw ConfigError("schedule: " + v.front());
}

double StepSchedule::alpha(std::size_t t) const {
  if (t == 0) return 1.0;
  return std::pow(static_cast<double>(t), -kappa1);
}

double StepSchedule::beta(std::size_t t) const {
  if (beta_fixed) return *beta_fixed;
  return beta0 * std::pow(static_cast<double>(t) + 1.0, -kappa2);
}

void DriverConfig::validate(std::size_t num_costs) const {
  schedule.validate();
  if (static_cast<std::size_t>(sigmas.size()) != num_costs)
    throw ConfigError("surrogate: need one sigma per cost function (" + std::to_string(num_costs) + ")");
  if (!(sigmas.array() > 0.0).all()) throw ConfigError("surrogate: every sigma must be positive");
  if (batch_size == 0) throw ConfigError("estimator: batch_size must be positive");
  if (variant == Variant::no_replay && batch_size % 2 != 0)
    throw ConfigError("estimator: no_replay needs an even batch_size (the window holds 2T = batch_size)");
  if (variant == Variant::replay) {
    if (window.mode == WindowMode::constant && window.half_length == 0)
      throw ConfigError("estimator: half_length must be positive");
    if (window.mode == WindowMode::logarithmic && (window.min_half_length == 0 || !(window.log_scale > 0.0)))
      throw ConfigError("estimator: logarithmic window needs min_half_length > 0 and log_scale > 0");
  }
  if (!(box.bound > 0.0)) throw ConfigError("policy: parameter bound must be positive");
}

std::size_t window_half_length(const DriverConfig& config, std::size_t t) {
  if (config.variant == Variant::no_replay) return config.batch_size / 2;
  return config.window.at(t);
}

PolicyParams zero_output_params(const GaussianMlpPolicy& policy, Rng& rng) {
  UnpackedParams u = policy.unflatten(policy.initial_params(rng));
  u.layers.back().weights.setZero();
  u.layers.back().bias.setZero();
  return policy.flatten(u);
}

Driver::Driver(std::unique_ptr<Environment> env, GaussianMlpPolicy policy, DriverConfig config, std::uint64_t seed,
               std::optional<PolicyParams> theta0)
    : env_(std::move(env)),
      policy_(std::move(policy)),
      config_(checked(std::move(config), *env_)),
      policy_rng_(Rng::derive(seed, 1)),
      env_rng_(Rng::derive(seed, 2)),
      window_(window_half_length(config_, 0), env_->spec().state_dim,
              static_cast<std::size_t>(env_->spec().action_box.dim()), env_->spec().num_constraints + 1) {
  const EnvSpec& spec = env_->spec();
  if (policy_.state_dim() != spec.state_dim || policy_.action_dim() != static_cast<std::size_t>(spec.action_box.dim()))
    throw ConfigError("driver: policy dimensions do not match the environment");
  if (theta0) {
    if (static_cast<std::size_t>(theta0->size()) != policy_.num_params())
      throw ConfigError("driver: initial parameters have the wrong length");
    theta_ = *theta0;
  } else {
    Rng init = Rng::derive(seed, 3);
    theta_ = policy_.initial_params(init);
  }
  theta_ = project_to_box(theta_, config_.box.bound);
}

Eigen::VectorXd Driver::shift(const Eigen::VectorXd& costs) const {
  Eigen::VectorXd c = costs;
  c.tail(c.size() - 1) -= env_->spec().limits;
  return c;
}

void Driver::sample(std::size_t steps) {
  for (std::size_t k = 0; k < steps; ++k) {
    Eigen::VectorXd s = env_->observe();
    GaussianAction a = policy_.sample_action(theta_, s, policy_rng_);
    StepResult r = env_->step(a.action, env_rng_);
    if (!r.costs.allFinite()) throw NumericError("environment returned a non-finite cost");
    window_.push(Experience{std::move(s), std::move(a.raw), shift(r.costs)});
    ++env_steps_;
  }
}

void Driver::prefill() {
  env_->reset(env_rng_);
  window_.clear();
  sample(window_.capacity());
  prefilled_ = true;
}

IterationRecord Driver::step() {
  if (!prefilled_) throw NotReadyError("driver: prefill() must run before step()");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t T = window_half_length(config_, t_);
  if (T != window_.half_length()) window_.resize(T);
  sample(config_.batch_size);
  if (!window_.full()) sample(window_.capacity() - window_.size());

  const double alpha = config_.schedule.alpha(t_);
  const Eigen::VectorXd J_tilde = sample_value(window_);
  // Q estimates subtract the value estimate after this iteration's update.
  Eigen::VectorXd J_next = est_.J_hat.size() == J_tilde.size() ? est_.J_hat : Eigen::VectorXd::Zero(J_tilde.size());
  kernels::blend(alpha, as_cspan(J_tilde), as_span(J_next));
  const GradientMatrix g_tilde = sample_gradient(window_, policy_, theta_, J_next);
  est_ = update_estimates(std::move(est_), J_tilde, g_tilde, alpha);

  const std::vector<SurrogateModel> models = build_surrogates(est_, theta_, config_.sigmas);
  const SubproblemSolution sol = solve_sca_subproblem(models, config_.box, config_.solver, warm_);

  IterationRecord rec;
  rec.t = t_;
  rec.J_hat = est_.J_hat;
  rec.running_costs = J_tilde;
  rec.running_costs.tail(J_tilde.size() - 1) += env_->spec().limits;
  rec.kind = sol.kind;
  rec.violation = sol.violation;
  rec.kkt_residual = sol.kkt_residual;
  rec.solver_iterations = sol.dual.iterations;
  rec.beta = config_.schedule.beta(t_);

  kernels::blend(rec.beta, as_cspan(sol.theta_bar), as_span(theta_));
  // A convex combination of box points stays in the box up to rounding.
  theta_ = project_to_box(std::move(theta_), config_.box.bound);

  ++t_;
  rec.env_steps = env_steps_;
  if (config_.record_wall_time)
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

std::vector<IterationRecord> Driver::run(std::size_t iterations,
                                         const std::function<void(const IterationRecord&)>& on_record) {
  if (!prefilled_) prefill();
  std::vector<IterationRecord> log;
  log.reserve(iterations);
  for (std::size_t k = 0; k < iterations; ++k) {
    log.push_back(step());
    if (on_record) on_record(log.back());
  }
  return log;
}

nlohmann::json Driver::checkpoint() const {
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < window_.size(); ++i) entries.push_back(experience_to_json(window_[i]));
  nlohmann::json est = {{"t", est_.t}, {"J_hat", vector_to_json(est_.J_hat)}};
  est["g_hat"] = matrix_to_json(Eigen::MatrixXd(est_.g_hat));
  return {{"version", kCheckpointVersion},
          {"environment", env_->name()},
          {"t", t_},
          {"env_steps", env_steps_},
          {"prefilled", prefilled_},
          {"theta", vector_to_json(theta_)},
          {"estimates", est},
          {"window", {{"half_length", window_.half_length()}, {"entries", entries}}},
          {"warm_start", {{"objective", vector_to_json(warm_.objective)}, {"feasible", vector_to_json(warm_.feasible)}}},
          {"policy_rng", policy_rng_.serialize()},
          {"env_rng", env_rng_.serialize()},
          {"env_state", env_->snapshot()}};
}

void Driver::restore(const nlohmann::json& ckpt) {
  if (ckpt.at("version").get<int>() != kCheckpointVersion)
    throw ConfigError("checkpoint: unsupported version " + ckpt.at("version").dump());
  if (ckpt.at("environment").get<std::string>() != env_->name())
    throw ConfigError("checkpoint: written for environment '" + ckpt.at("environment").get<std::string>() + "'");
  PolicyParams theta = vector_from_json(ckpt.at("theta"));
  if (static_cast<std::size_t>(theta.size()) != policy_.num_params())
    throw ConfigError("checkpoint: parameter vector has the wrong length");

  const auto& w = ckpt.at("window");
  ReplayWindow window(w.at("half_length").get<std::size_t>(), window_.state_dim(), window_.action_dim(),
                      window_.num_costs());
  for (const auto& e : w.at("entries"))
    window.push(Experience{vector_from_json(e.at(0)), vector_from_json(e.at(1)), vector_from_json(e.at(2))});

  EstimateState est;
  const auto& ej = ckpt.at("estimates");
  est.t = ej.at("t").get<std::size_t>();
  est.J_hat = vector_from_json(ej.at("J_hat"));
  est.g_hat = matrix_from_json(ej.at("g_hat"));

  env_->restore(ckpt.at("env_state"));
  policy_rng_.deserialize(ckpt.at("policy_rng").get<std::string>());
  env_rng_.deserialize(ckpt.at("env_rng").get<std::string>());
  theta_ = std::move(theta);
  window_ = std::move(window);
  est_ = std::move(est);
  warm_.objective = vector_from_json(ckpt.at("warm_start").at("objective"));
  warm_.feasible = vector_from_json(ckpt.at("warm_start").at("feasible"));
  t_ = ckpt.at("t").get<std::size_t>();
  env_steps_ = ckpt.at("env_steps").get<std::uint64_t>();
  prefilled_ = ckpt.at("prefilled").get<bool>();
}

}  // namespace scaopo
