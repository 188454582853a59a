// SPDX-License-Identifier: Apache-2.0
#include "scaopo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include "scaopo/error.hpp"

namespace scaopo {
namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::size_t final_window_start(std::size_t n, double fraction) {
  const auto len = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  return n - std::min(n, std::max<std::size_t>(len, 1));
}

bool meets_limits(const Eigen::VectorXd& costs, const Eigen::VectorXd& limits) {
  for (Eigen::Index i = 0; i < limits.size(); ++i)
    if (!(costs[i + 1] <= limits[i])) return false;
  return true;
}

double worst_violation(const Eigen::VectorXd& costs, const Eigen::VectorXd& limits) {
  double v = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < limits.size(); ++i) v = std::max(v, costs[i + 1] - limits[i]);
  return v;
}

// Better-than ordering for restart selection.
bool better(const SeedResult& a, const SeedResult& b) {
  if (a.error.empty() != b.error.empty()) return a.error.empty();
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) return a.final_costs[0] < b.final_costs[0];
  return worst_violation(a.final_costs, a.limits) < worst_violation(b.final_costs, b.limits);
}

SeedResult run_restart(const RunConfig& config, std::uint64_t seed, std::size_t restart) {
  SeedResult r;
  r.seed = seed;
  r.restart = restart;
  try {
    std::unique_ptr<Environment> env = make_environment(config, seed);
    r.limits = env->spec().limits;
    GaussianMlpPolicy policy = make_policy(config, env->spec());
    PolicyParams theta0 = make_initial_params(config, policy, seed, restart);
    Driver driver(std::move(env), std::move(policy), config.driver, seed, std::move(theta0));
    driver.run(config.run.iterations, [&](const IterationRecord& rec) { r.log.push_back(rec); });
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  if (!r.log.empty()) {
    r.final_costs = final_window_average(r.log, config.run.final_window_fraction);
    r.feasible = r.error.empty() && meets_limits(r.final_costs, r.limits);
    const std::size_t start = final_window_start(r.log.size(), config.run.final_window_fraction);
    std::size_t feasible_updates = 0;
    for (std::size_t i = start; i < r.log.size(); ++i) feasible_updates += r.log[i].kind == UpdateKind::feasible;
    r.feasible_update_fraction = static_cast<double>(feasible_updates) / static_cast<double>(r.log.size() - start);
  } else if (r.error.empty()) {
    r.error = "no iterations completed";
  }
  return r;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

// Removes earlier outputs of this tool; any other file makes the directory unusable.
void prepare_output_directory(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  static const std::regex owned(R"((config\.json|summary\.json|SCAOPO_\d+_seed_\d+\.csv|SCAOPO_\d+_aggregate\.csv))");
  std::vector<fs::path> remove;
  for (const fs::directory_entry& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_regular_file() || !std::regex_match(name, owned))
      throw std::runtime_error("output directory " + dir.string() + " contains a foreign entry '" + name + "'");
    remove.push_back(e.path());
  }
  for (const fs::path& p : remove) fs::remove(p);
}

nlohmann::json seed_summary(const SeedResult& s) {
  nlohmann::json j = {{"seed", s.seed},
                      {"restart", s.restart},
                      {"iterations_completed", s.log.size()},
                      {"limits", vector_to_json(s.limits)},
                      {"feasible", s.feasible},
                      {"feasible_update_fraction", s.feasible_update_fraction}};
  if (s.final_costs.size()) j["final_window_costs"] = vector_to_json(s.final_costs);
  if (!s.error.empty()) j["error"] = s.error;
  return j;
}

}  // namespace

Eigen::VectorXd final_window_average(const std::vector<IterationRecord>& log, double fraction) {
  if (log.empty()) throw ConfigError("final_window_average: empty log");
  const std::size_t start = final_window_start(log.size(), fraction);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(log.front().running_costs.size());
  for (std::size_t i = start; i < log.size(); ++i) sum += log[i].running_costs;
  return sum / static_cast<double>(log.size() - start);
}

SeedResult run_seed(const RunConfig& config, std::uint64_t seed) {
  SeedResult best = run_restart(config, seed, 0);
  for (std::size_t r = 1; r < config.run.n_restarts; ++r) {
    SeedResult cand = run_restart(config, seed, r);
    if (better(cand, best)) best = std::move(cand);
  }
  return best;
}

Eigen::VectorXd simulate_equal_power(const RunConfig& config, std::uint64_t seed, double p_total, std::size_t steps) {
  if (config.env.kind != EnvKind::mimo) throw ConfigError("equal-power baseline needs the mimo environment");
  const MimoParams& p = config.env.mimo;
  MimoEnv env(p, instance_seed(config, seed));
  Rng rng = Rng::derive(seed, 2);
  env.reset(rng);
  const EqualPowerAction eq = baseline_equal_power(p.n_users, p_total, p.effective_noise());
  const auto K = static_cast<Eigen::Index>(p.n_users);
  Eigen::VectorXd action(K + 1);
  action.head(K) = eq.p.cwiseMin(p.p_max);
  action[K] = std::clamp(eq.alpha, p.alpha_min, p.alpha_max);
  const std::size_t warmup = steps / 10;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(K + 1);
  for (std::size_t s = 0; s < steps; ++s) {
    const StepResult r = env.step(action, rng);
    if (s >= warmup) sum += r.costs;
  }
  return sum / static_cast<double>(steps - warmup);
}

BaselineResult mimo_equal_power_baseline(const RunConfig& config, std::uint64_t seed) {
  const MimoParams& p = config.env.mimo;
  const Eigen::VectorXd limits =
      Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.n_users), p.delay_limit_slots * p.slot_s);
  const std::size_t steps = config.output.baseline_steps;
  BaselineResult out;
  out.seed = seed;
  double hi = p.p_max * static_cast<double>(p.n_users);
  Eigen::VectorXd hi_costs = simulate_equal_power(config, seed, hi, steps);
  if (!meets_limits(hi_costs, limits)) {
    out.p_total = hi;
    out.costs = hi_costs;
    out.met = false;
    return out;
  }
  double lo = 0.0;
  for (int k = 0; k < 30 && hi - lo > 1e-6 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    Eigen::VectorXd c = simulate_equal_power(config, seed, mid, steps);
    if (meets_limits(c, limits)) {
      hi = mid;
      hi_costs = std::move(c);
    } else {
      lo = mid;
    }
  }
  out.p_total = hi;
  out.costs = hi_costs;
  out.met = true;
  return out;
}

std::filesystem::path output_directory(const RunConfig& config) {
  std::filesystem::path root = config.output.root;
  if (const char* env = std::getenv("SCAOPO_OUTPUT_ROOT"); env && *env) root = env;
  return root / config.output.name;
}

void write_metrics_csv(std::ostream& os, const std::vector<IterationRecord>& log, bool wall_time) {
  const Eigen::Index n = log.empty() ? 0 : log.front().running_costs.size();
  os << "iteration,env_steps";
  for (Eigen::Index i = 0; i < n; ++i) os << ",cost_" << i;
  for (Eigen::Index i = 0; i < n; ++i) os << ",J_hat_" << i;
  os << ",update,violation,kkt_residual,solver_iterations,beta";
  if (wall_time) os << ",wall_ms";
  os << '\n';
  for (const IterationRecord& r : log) {
    os << r.t << ',' << r.env_steps;
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt(r.running_costs[i]);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << fmt(r.J_hat[i]);
    os << ',' << (r.kind == UpdateKind::objective ? "objective" : "feasible") << ',' << fmt(r.violation) << ','
       << fmt(r.kkt_residual) << ',' << r.solver_iterations << ',' << fmt(r.beta);
    if (wall_time) os << ',' << fmt(r.wall_ms);
    os << '\n';
  }
}

void write_aggregate_csv(std::ostream& os, const std::vector<SeedResult>& seeds) {
  std::size_t len = std::numeric_limits<std::size_t>::max();
  Eigen::Index n = 0;
  for (const SeedResult& s : seeds) {
    len = std::min(len, s.log.size());
    if (!s.log.empty()) n = s.log.front().running_costs.size();
  }
  if (seeds.empty()) len = 0;
  os << "iteration,env_steps,seeds";
  for (Eigen::Index i = 0; i < n; ++i) os << ",cost_" << i << "_mean,cost_" << i << "_std";
  os << '\n';
  const auto count = static_cast<double>(seeds.size());
  for (std::size_t t = 0; t < len; ++t) {
    os << seeds.front().log[t].t << ',' << seeds.front().log[t].env_steps << ',' << seeds.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      double mean = 0.0;
      for (const SeedResult& s : seeds) mean += s.log[t].running_costs[i];
      mean /= count;
      double ss = 0.0;
      for (const SeedResult& s : seeds) ss += (s.log[t].running_costs[i] - mean) * (s.log[t].running_costs[i] - mean);
      const double sd = seeds.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
      os << ',' << fmt(mean) << ',' << fmt(sd);
    }
    os << '\n';
  }
}

ExperimentResult run_experiment(const RunConfig& config) {
  ExperimentResult result;
  result.out_dir = output_directory(config);
  result.tag = variant_tag(config.driver.variant);
  prepare_output_directory(result.out_dir);
  write_file(result.out_dir / "config.json", to_json(config).dump(2) + "\n");

  const std::vector<std::uint64_t>& seeds = config.run.seeds;
  result.seeds.resize(seeds.size());
  const bool baseline = config.env.kind == EnvKind::mimo && config.output.baseline;
  if (baseline) result.baseline.resize(seeds.size());
  std::vector<std::string> baseline_errors(seeds.size());

  std::size_t workers = config.run.threads ? config.run.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, seeds.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) {
      result.seeds[i] = run_seed(config, seeds[i]);
      if (baseline) {
        try {
          result.baseline[i] = mimo_equal_power_baseline(config, seeds[i]);
        } catch (const std::exception& e) {
          baseline_errors[i] = e.what();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();

  for (const SeedResult& s : result.seeds) {
    std::ofstream os(result.out_dir / (result.tag + "_seed_" + std::to_string(s.seed) + ".csv"), std::ios::binary);
    write_metrics_csv(os, s.log, config.output.record_wall_time);
    if (!s.error.empty()) result.ok = false;
  }
  {
    std::ofstream os(result.out_dir / (result.tag + "_aggregate.csv"), std::ios::binary);
    write_aggregate_csv(os, result.seeds);
  }

  nlohmann::json summary = {{"tag", result.tag},
                            {"environment", env_kind_name(config.env.kind)},
                            {"iterations", config.run.iterations},
                            {"final_window_fraction", config.run.final_window_fraction}};
  nlohmann::json per_seed = nlohmann::json::array();
  Eigen::VectorXd mean;
  std::size_t completed = 0;
  for (const SeedResult& s : result.seeds) {
    per_seed.push_back(seed_summary(s));
    if (s.error.empty() && s.final_costs.size()) {
      mean = completed ? Eigen::VectorXd(mean + s.final_costs) : s.final_costs;
      ++completed;
    }
  }
  summary["seeds"] = per_seed;
  if (completed) summary["final_window_costs_mean"] = vector_to_json(mean / static_cast<double>(completed));
  summary["all_feasible"] = std::all_of(result.seeds.begin(), result.seeds.end(),
                                        [](const SeedResult& s) { return s.feasible; });
  if (baseline) {
    nlohmann::json b = nlohmann::json::array();
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      if (!baseline_errors[i].empty()) {
        b.push_back({{"seed", seeds[i]}, {"error", baseline_errors[i]}});
        result.ok = false;
        continue;
      }
      const BaselineResult& r = result.baseline[i];
      b.push_back({{"seed", r.seed}, {"p_total", r.p_total}, {"costs", vector_to_json(r.costs)}, {"met", r.met}});
    }
    summary["baseline"] = b;
  }
  summary["ok"] = result.ok;
  write_file(result.out_dir / "summary.json", summary.dump(2) + "\n");
  return result;
}

}  // namespace scaopo
