// SPDX-License-Identifier: Apache-2.0
#include "scaopo/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "scaopo/error.hpp"
#include "scaopo/lqr_env.hpp"
#include "scaopo/tabular_env.hpp"

namespace scaopo {
namespace {

using nlohmann::json;

// Reads one JSON object, remembering which keys were consumed so the rest can
// be reported as unknown.
class Section {
 public:
  Section(const json* node, std::string name, std::vector<std::string>& errors)
      : node_(node), name_(std::move(name)), errors_(errors) {
    if (node_ && !node_->is_object()) {
      error("must be an object");
      node_ = nullptr;
    }
  }

  bool present() const { return node_ != nullptr; }
  bool has(const std::string& key) const { return node_ && node_->contains(key); }

  template <class T>
  T get(const std::string& key, T fallback) {
    if (auto v = opt<T>(key)) return *v;
    return fallback;
  }

  template <class T>
  std::optional<T> opt(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return std::nullopt;
    try {
      return node_->at(key).get<T>();
    } catch (const json::exception&) {
      error("key '" + key + "' has the wrong type (" + std::string(node_->at(key).type_name()) + ")");
      return std::nullopt;
    }
  }

  std::optional<Eigen::VectorXd> vector(const std::string& key) {
    auto v = opt<std::vector<double>>(key);
    if (!v) return std::nullopt;
    return Eigen::Map<const Eigen::VectorXd>(v->data(), static_cast<Eigen::Index>(v->size()));
  }

  template <class T>
  void require(const std::string& key) {
    if (!has(key)) error("missing required key '" + key + "'");
  }

  void error(const std::string& msg) { errors_.push_back(name_ + ": " + msg); }

  void finish() {
    if (!node_) return;
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!seen_.count(it.key())) error("unknown key '" + it.key() + "'");
  }

 private:
  const json* node_;
  std::string name_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

const json* child(const json& doc, const std::string& key) {
  if (!doc.contains(key)) return nullptr;
  return &doc.at(key);
}

void parse_env(const json& doc, EnvConfig& env, std::vector<std::string>& errors) {
  Section s(child(doc, "env"), "env", errors);
  const std::string id = s.get<std::string>("id", "");
  if (id.empty()) {
    s.error("missing required key 'id' (lqr, mimo or tabular)");
    return;
  }
  env.instance_seed = s.opt<std::uint64_t>("instance_seed");
  if (id == "lqr") {
    env.kind = EnvKind::lqr;
    LqrEnvConfig& c = env.lqr;
    c.state_dim = s.get("state_dim", c.state_dim);
    c.action_dim = s.get("action_dim", c.action_dim);
    c.num_constraints = s.get("num_constraints", c.num_constraints);
    c.spectral_radius = s.get("spectral_radius", c.spectral_radius);
    c.noise_std = s.get("noise_std", c.noise_std);
    c.action_bound = s.get("action_bound", c.action_bound);
    c.state_clip = s.get("state_clip", c.state_clip);
    c.limit_factor = s.get("limit_factor", c.limit_factor);
    c.limit_steps = s.get("limit_steps", c.limit_steps);
    c.limits = s.vector("limits");
    if (c.state_dim == 0 || c.action_dim == 0) s.error("state_dim and action_dim must be positive");
    if (!(c.spectral_radius > 0.0)) s.error("spectral_radius must be positive");
    if (!(c.noise_std >= 0.0)) s.error("noise_std must be nonnegative");
    if (!(c.action_bound > 0.0)) s.error("action_bound must be positive");
    if (!(c.state_clip > 0.0)) s.error("state_clip must be positive");
    if (!(c.limit_factor > 0.0)) s.error("limit_factor must be positive");
    if (c.limit_steps == 0) s.error("limit_steps must be positive");
    if (c.limits && static_cast<std::size_t>(c.limits->size()) != c.num_constraints)
      s.error("limits must have num_constraints entries");
  } else if (id == "mimo") {
    env.kind = EnvKind::mimo;
    MimoParams& p = env.mimo;
    p.n_tx = s.get("n_tx", p.n_tx);
    p.n_users = s.get("n_users", p.n_users);
    p.bandwidth_hz = s.get("bandwidth_hz", p.bandwidth_hz);
    p.slot_s = s.get("slot_s", p.slot_s);
    p.noise_dbm_per_hz = s.get("noise_dbm_per_hz", p.noise_dbm_per_hz);
    p.reference_gain_db = s.get("reference_gain_db", p.reference_gain_db);
    p.arrival_max_bps = 1e6 * s.get("arrival_max_mbps", p.arrival_max_bps / 1e6);
    p.p_max = s.get("p_max", p.p_max);
    p.alpha_min = s.get("alpha_min", p.alpha_min);
    p.alpha_max = s.get("alpha_max", p.alpha_max);
    p.n_paths = s.get("n_paths", p.n_paths);
    p.angular_spread_deg = s.get("angular_spread_deg", p.angular_spread_deg);
    p.gain_db_min = s.get("gain_db_min", p.gain_db_min);
    p.gain_db_max = s.get("gain_db_max", p.gain_db_max);
    p.delay_limit_slots = s.get("delay_limit_slots", p.delay_limit_slots);
    try {
      p.validate();
    } catch (const ConfigError& e) {
      s.error(e.what());
    }
  } else if (id == "tabular") {
    env.kind = EnvKind::tabular;
    TabularEnvConfig& c = env.tabular;
    c.n_states = s.get("n_states", c.n_states);
    c.n_actions = s.get("n_actions", c.n_actions);
    c.num_constraints = s.get("num_constraints", c.num_constraints);
    c.limits = s.vector("limits");
    if (c.n_states == 0 || c.n_states > 10) s.error("n_states must lie in [1, 10]");
    if (c.n_actions < 2 || c.n_actions > 10) s.error("n_actions must lie in [2, 10]");
    if (c.limits && static_cast<std::size_t>(c.limits->size()) != c.num_constraints)
      s.error("limits must have num_constraints entries");
  } else {
    s.error("unknown id '" + id + "' (expected lqr, mimo or tabular)");
    return;
  }
  s.finish();
}

std::size_t num_constraints(const EnvConfig& env) {
  switch (env.kind) {
    case EnvKind::lqr: return env.lqr.num_constraints;
    case EnvKind::mimo: return env.mimo.n_users;
    case EnvKind::tabular: return env.tabular.num_constraints;
  }
  return 0;
}

}  // namespace

std::string env_kind_name(EnvKind kind) {
  switch (kind) {
    case EnvKind::lqr: return "lqr";
    case EnvKind::mimo: return "mimo";
    case EnvKind::tabular: return "tabular";
  }
  return "?";
}

std::string variant_tag(Variant variant) { return variant == Variant::replay ? "SCAOPO_1" : "SCAOPO_2"; }

RunConfig parse_config(const json& doc, const std::string& default_name) {
  std::vector<std::string> errors;
  RunConfig cfg;
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  static const std::set<std::string> kSections{"env", "policy", "schedule", "surrogate", "estimator",
                                               "run", "solver", "output"};
  static const std::vector<std::string> kRequired{"env", "schedule", "surrogate", "estimator", "run"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!kSections.count(it.key())) errors.push_back("config: unknown section '" + it.key() + "'");
  for (const std::string& name : kRequired)
    if (!doc.contains(name)) errors.push_back("config: missing section '" + name + "'");

  if (doc.contains("env")) parse_env(doc, cfg.env, errors);

  {
    Section s(child(doc, "policy"), "policy", errors);
    if (auto h = s.opt<std::vector<std::size_t>>("hidden")) cfg.policy.hidden = *h;
    cfg.policy.bound = s.get("bound", cfg.policy.bound);
    const std::string init = s.get<std::string>("init", "random");
    if (init == "random")
      cfg.policy.init = PolicyInit::random;
    else if (init == "zero_output")
      cfg.policy.init = PolicyInit::zero_output;
    else
      s.error("init must be 'random' or 'zero_output'");
    for (std::size_t h : cfg.policy.hidden)
      if (h == 0) s.error("hidden layer widths must be positive");
    if (!(cfg.policy.bound > 0.0)) s.error("bound must be positive");
    cfg.policy.init_std_fraction = s.get("init_std_fraction", cfg.policy.init_std_fraction);
    if (!(cfg.policy.init_std_fraction > 0.0)) s.error("init_std_fraction must be positive");
    s.finish();
  }
  cfg.driver.box.bound = cfg.policy.bound;

  {
    Section s(child(doc, "schedule"), "schedule", errors);
    StepSchedule& sc = cfg.driver.schedule;
    if (s.present()) {
      s.require<double>("kappa1");
      s.require<double>("kappa2");
    }
    sc.kappa1 = s.get("kappa1", sc.kappa1);
    sc.kappa2 = s.get("kappa2", sc.kappa2);
    sc.beta0 = s.get("beta0", sc.beta0);
    sc.beta_fixed = s.opt<double>("beta_fixed");
    for (const std::string& v : sc.violations()) s.error(v);
    s.finish();
  }

  const std::size_t m = num_constraints(cfg.env);
  {
    Section s(child(doc, "surrogate"), "surrogate", errors);
    if (s.present() && !s.has("sigma")) s.error("missing required key 'sigma'");
    if (s.has("sigma") && doc.at("surrogate").at("sigma").is_number()) {
      cfg.driver.sigmas = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m + 1), s.get("sigma", 1.0));
    } else if (auto v = s.vector("sigma")) {
      cfg.driver.sigmas = *v;
      if (static_cast<std::size_t>(v->size()) != m + 1)
        s.error("sigma array needs " + std::to_string(m + 1) + " entries (objective and each constraint)");
    } else {
      cfg.driver.sigmas = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m + 1));
    }
    if (!(cfg.driver.sigmas.array() > 0.0).all()) s.error("every sigma must be positive");
    s.finish();
  }

  {
    Section s(child(doc, "estimator"), "estimator", errors);
    WindowSchedule& w = cfg.driver.window;
    const std::string mode = s.get<std::string>("window", "constant");
    if (mode == "constant")
      w.mode = WindowMode::constant;
    else if (mode == "logarithmic")
      w.mode = WindowMode::logarithmic;
    else
      s.error("window must be 'constant' or 'logarithmic'");
    w.half_length = s.get("half_length", w.half_length);
    w.min_half_length = s.get("min_half_length", w.min_half_length);
    w.log_scale = s.get("log_scale", w.log_scale);
    cfg.driver.batch_size = s.get("batch_size", cfg.driver.batch_size);
    const std::string variant = s.get<std::string>("variant", "replay");
    if (variant == "replay")
      cfg.driver.variant = Variant::replay;
    else if (variant == "no_replay")
      cfg.driver.variant = Variant::no_replay;
    else
      s.error("variant must be 'replay' or 'no_replay'");
    if (cfg.driver.batch_size == 0) s.error("batch_size must be positive");
    if (cfg.driver.variant == Variant::no_replay && cfg.driver.batch_size % 2 != 0)
      s.error("no_replay needs an even batch_size");
    if (w.half_length == 0) s.error("half_length must be positive");
    if (w.min_half_length == 0) s.error("min_half_length must be positive");
    if (!(w.log_scale > 0.0)) s.error("log_scale must be positive");
    s.finish();
  }

  {
    Section s(child(doc, "run"), "run", errors);
    if (s.present()) s.require<std::size_t>("iterations");
    cfg.run.iterations = s.get("iterations", cfg.run.iterations);
    if (auto seeds = s.opt<std::vector<std::uint64_t>>("seeds")) cfg.run.seeds = *seeds;
    cfg.run.threads = s.get("threads", cfg.run.threads);
    cfg.run.n_restarts = s.get("n_restarts", cfg.run.n_restarts);
    cfg.run.final_window_fraction = s.get("final_window_fraction", cfg.run.final_window_fraction);
    if (cfg.run.iterations == 0) s.error("iterations must be positive");
    if (cfg.run.seeds.empty()) s.error("seeds must not be empty");
    if (std::set<std::uint64_t>(cfg.run.seeds.begin(), cfg.run.seeds.end()).size() != cfg.run.seeds.size())
      s.error("seeds must be distinct");
    if (cfg.run.n_restarts == 0) s.error("n_restarts must be at least 1");
    if (!(cfg.run.final_window_fraction > 0.0 && cfg.run.final_window_fraction <= 1.0))
      s.error("final_window_fraction must lie in (0, 1]");
    s.finish();
  }

  {
    Section s(child(doc, "solver"), "solver", errors);
    SolverOptions& o = cfg.driver.solver;
    const std::string method = s.get<std::string>("method", "projected_newton");
    if (method == "projected_newton")
      o.method = DualMethod::projected_newton;
    else if (method == "subgradient")
      o.method = DualMethod::subgradient;
    else
      s.error("method must be 'projected_newton' or 'subgradient'");
    o.max_iterations = s.get("max_iterations", o.max_iterations);
    o.kkt_tol = s.get("kkt_tol", o.kkt_tol);
    o.feas_tol = s.get("feas_tol", o.feas_tol);
    o.step0 = s.get("step0", o.step0);
    o.stall_tol = s.get("stall_tol", o.stall_tol);
    o.stall_window = s.get("stall_window", o.stall_window);
    if (o.max_iterations == 0) s.error("max_iterations must be positive");
    if (!(o.kkt_tol > 0.0) || !(o.feas_tol > 0.0)) s.error("kkt_tol and feas_tol must be positive");
    if (!(o.step0 > 0.0)) s.error("step0 must be positive");
    s.finish();
  }

  {
    Section s(child(doc, "output"), "output", errors);
    OutputConfig& o = cfg.output;
    o.root = s.get("root", o.root);
    o.name = s.get("name", default_name);
    o.record_wall_time = s.get("record_wall_time", o.record_wall_time);
    o.baseline = s.get("baseline", o.baseline);
    o.baseline_steps = s.get("baseline_steps", o.baseline_steps);
    if (o.name.empty() || o.name.find('/') != std::string::npos) s.error("name must be a non-empty plain file name");
    if (o.baseline_steps < 100) s.error("baseline_steps must be at least 100");
    s.finish();
  }
  cfg.driver.record_wall_time = cfg.output.record_wall_time;

  if (!errors.empty()) {
    std::ostringstream os;
    for (std::size_t i = 0; i < errors.size(); ++i) os << (i ? "\n" : "") << errors[i];
    throw ConfigError(os.str());
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.stem().string());
}

json to_json(const RunConfig& c) {
  json env;
  env["id"] = env_kind_name(c.env.kind);
  if (c.env.instance_seed) env["instance_seed"] = *c.env.instance_seed;
  switch (c.env.kind) {
    case EnvKind::lqr: {
      const LqrEnvConfig& l = c.env.lqr;
      env.update({{"state_dim", l.state_dim},       {"action_dim", l.action_dim},   {"num_constraints", l.num_constraints},
                  {"spectral_radius", l.spectral_radius}, {"noise_std", l.noise_std}, {"action_bound", l.action_bound},
                  {"state_clip", l.state_clip},     {"limit_factor", l.limit_factor}, {"limit_steps", l.limit_steps}});
      if (l.limits) env["limits"] = vector_to_json(*l.limits);
      break;
    }
    case EnvKind::mimo: {
      const MimoParams& p = c.env.mimo;
      env.update({{"n_tx", p.n_tx},
                  {"n_users", p.n_users},
                  {"bandwidth_hz", p.bandwidth_hz},
                  {"slot_s", p.slot_s},
                  {"noise_dbm_per_hz", p.noise_dbm_per_hz},
                  {"reference_gain_db", p.reference_gain_db},
                  {"arrival_max_mbps", p.arrival_max_bps / 1e6},
                  {"p_max", p.p_max},
                  {"alpha_min", p.alpha_min},
                  {"alpha_max", p.alpha_max},
                  {"n_paths", p.n_paths},
                  {"angular_spread_deg", p.angular_spread_deg},
                  {"gain_db_min", p.gain_db_min},
                  {"gain_db_max", p.gain_db_max},
                  {"delay_limit_slots", p.delay_limit_slots}});
      break;
    }
    case EnvKind::tabular: {
      const TabularEnvConfig& t = c.env.tabular;
      env.update({{"n_states", t.n_states}, {"n_actions", t.n_actions}, {"num_constraints", t.num_constraints}});
      if (t.limits) env["limits"] = vector_to_json(*t.limits);
      break;
    }
  }
  json schedule = {{"kappa1", c.driver.schedule.kappa1},
                   {"kappa2", c.driver.schedule.kappa2},
                   {"beta0", c.driver.schedule.beta0}};
  if (c.driver.schedule.beta_fixed) schedule["beta_fixed"] = *c.driver.schedule.beta_fixed;
  const WindowSchedule& w = c.driver.window;
  const SolverOptions& o = c.driver.solver;
  return {
      {"env", env},
      {"policy",
       {{"hidden", c.policy.hidden},
        {"bound", c.policy.bound},
        {"init", c.policy.init == PolicyInit::random ? "random" : "zero_output"},
        {"init_std_fraction", c.policy.init_std_fraction}}},
      {"schedule", schedule},
      {"surrogate", {{"sigma", vector_to_json(c.driver.sigmas)}}},
      {"estimator",
       {{"window", w.mode == WindowMode::constant ? "constant" : "logarithmic"},
        {"half_length", w.half_length},
        {"min_half_length", w.min_half_length},
        {"log_scale", w.log_scale},
        {"batch_size", c.driver.batch_size},
        {"variant", c.driver.variant == Variant::replay ? "replay" : "no_replay"}}},
      {"run",
       {{"iterations", c.run.iterations},
        {"seeds", c.run.seeds},
        {"threads", c.run.threads},
        {"n_restarts", c.run.n_restarts},
        {"final_window_fraction", c.run.final_window_fraction}}},
      {"solver",
       {{"method", o.method == DualMethod::projected_newton ? "projected_newton" : "subgradient"},
        {"max_iterations", o.max_iterations},
        {"kkt_tol", o.kkt_tol},
        {"feas_tol", o.feas_tol},
        {"step0", o.step0},
        {"stall_tol", o.stall_tol},
        {"stall_window", o.stall_window}}},
      {"output",
       {{"root", c.output.root},
        {"name", c.output.name},
        {"record_wall_time", c.output.record_wall_time},
        {"baseline", c.output.baseline},
        {"baseline_steps", c.output.baseline_steps}}},
  };
}

std::uint64_t instance_seed(const RunConfig& config, std::uint64_t run_seed) {
  if (config.env.instance_seed) return *config.env.instance_seed;
  return splitmix64(run_seed ^ 0x5ca0f1e5ca0f1e00ULL);
}

std::unique_ptr<Environment> make_environment(const RunConfig& config, std::uint64_t run_seed) {
  const std::uint64_t seed = instance_seed(config, run_seed);
  switch (config.env.kind) {
    case EnvKind::lqr: {
      const LqrEnvConfig& c = config.env.lqr;
      LqrParams params = lqr_make(seed, c.state_dim, c.action_dim, c.num_constraints, c.spectral_radius, c.noise_std);
      ActionBox box = ActionBox::uniform(static_cast<Eigen::Index>(c.action_dim), -c.action_bound, c.action_bound);
      Eigen::VectorXd limits;
      if (c.limits) {
        limits = *c.limits;
      } else {
        // Reference policy: mean at the box centre with the policy's initial spread.
        Rng rng = Rng::derive(seed, 7);
        limits = lqr_reference_limits(params, box, 0.25 * box.width(), c.limit_steps, c.limit_factor, rng, c.state_clip);
      }
      return std::make_unique<LqrEnv>(std::move(params), std::move(box), std::move(limits), c.state_clip);
    }
    case EnvKind::mimo:
      return std::make_unique<MimoEnv>(config.env.mimo, seed);
    case EnvKind::tabular: {
      const TabularEnvConfig& c = config.env.tabular;
      Eigen::VectorXd limits =
          c.limits ? *c.limits : Eigen::VectorXd::Constant(static_cast<Eigen::Index>(c.num_constraints), 0.5);
      return std::make_unique<TabularEnv>(tabular_make(c.n_states, c.n_actions, seed, c.num_constraints),
                                          std::move(limits));
    }
  }
  throw ConfigError("unknown environment kind");
}

GaussianMlpPolicy make_policy(const RunConfig& config, const EnvSpec& spec) {
  MlpArch arch;
  arch.input_dim = spec.state_dim;
  arch.hidden_dims = config.policy.hidden;
  arch.output_dim = static_cast<std::size_t>(spec.action_box.dim());
  return GaussianMlpPolicy(arch, spec.action_box);
}

PolicyParams make_initial_params(const RunConfig& config, const GaussianMlpPolicy& policy, std::uint64_t run_seed,
                                 std::size_t restart) {
  Rng rng = Rng::derive(run_seed, 3 + 1000 * static_cast<std::uint64_t>(restart));
  PolicyParams p = config.policy.init == PolicyInit::zero_output ? zero_output_params(policy, rng)
                                                                  : policy.initial_params(rng);
  const Eigen::Index n_a = static_cast<Eigen::Index>(policy.action_dim());
  p.segment(static_cast<Eigen::Index>(policy.log_std_offset()), n_a) =
      (config.policy.init_std_fraction * policy.action_box().width().array()).log().matrix();
  return p;
}

}  // namespace scaopo
