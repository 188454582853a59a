// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <fstream>
#include <string>

#include <doctest.h>

#include "scaopo/error.hpp"
#include "scaopo/lqr_env.hpp"
#include "scaopo/mimo_env.hpp"
#include "scaopo/run_config.hpp"
#include "test_util.hpp"

using namespace scaopo;
using nlohmann::json;

namespace {

json base_doc() {
  return {
      {"env", {{"id", "lqr"}, {"state_dim", 4}, {"action_dim", 2}, {"num_constraints", 1}, {"limits", {3.0}}}},
      {"schedule", {{"kappa1", 0.6}, {"kappa2", 0.8}}},
      {"surrogate", {{"sigma", 1.0}}},
      {"estimator", {{"window", "constant"}, {"half_length", 30}, {"batch_size", 10}}},
      {"run", {{"iterations", 5}, {"seeds", {1, 2}}}},
  };
}

std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("minimal config parses with defaults") {
    const RunConfig c = parse_config(base_doc(), "demo");
    CHECK(c.env.kind == EnvKind::lqr);
    CHECK(c.env.lqr.state_dim == 4);
    CHECK(c.policy.hidden == std::vector<std::size_t>{128, 128});
    CHECK(c.policy.init_std_fraction == 0.25);
    CHECK(c.driver.sigmas.size() == 2);
    CHECK(c.driver.batch_size == 10);
    CHECK(c.run.seeds == std::vector<std::uint64_t>{1, 2});
    CHECK(c.output.name == "demo");
    CHECK(variant_tag(c.driver.variant) == "SCAOPO_1");
  }

  TEST_CASE("unknown keys and sections are rejected") {
    json doc = base_doc();
    doc["env"]["stat_dim"] = 3;
    CHECK(error_of(doc).find("env: unknown key 'stat_dim'") != std::string::npos);
    doc = base_doc();
    doc["extras"] = json::object();
    CHECK(error_of(doc).find("unknown section 'extras'") != std::string::npos);
  }

  TEST_CASE("missing sections and keys are named") {
    json doc = base_doc();
    doc.erase("surrogate");
    CHECK(error_of(doc).find("missing section 'surrogate'") != std::string::npos);
    doc = base_doc();
    doc["schedule"].erase("kappa2");
    CHECK(error_of(doc).find("schedule: missing required key 'kappa2'") != std::string::npos);
    doc = base_doc();
    doc["env"].erase("id");
    CHECK_FALSE(error_of(doc).empty());
  }

  TEST_CASE("step-size errors explain the bound") {
    json doc = base_doc();
    doc["schedule"]["kappa1"] = 0.9;
    const std::string msg = error_of(doc);
    CHECK(msg.find("schedule: kappa1 must be < kappa2") != std::string::npos);
    doc["schedule"]["kappa1"] = 0.4;
    CHECK(error_of(doc).find("kappa1 must lie in (0.5, 1)") != std::string::npos);
  }

  TEST_CASE("every violation is reported, one per line") {
    json doc = base_doc();
    doc["schedule"]["beta0"] = 2.0;
    doc["policy"] = {{"bound", -1.0}};
    doc["env"]["bogus"] = true;
    const std::string msg = error_of(doc);
    CHECK(std::count(msg.begin(), msg.end(), '\n') >= 2);
    CHECK(msg.find("beta0") != std::string::npos);
    CHECK(msg.find("bound must be positive") != std::string::npos);
    CHECK(msg.find("bogus") != std::string::npos);
  }

  TEST_CASE("wrong types are reported") {
    json doc = base_doc();
    doc["run"]["iterations"] = "many";
    CHECK(error_of(doc).find("run: key 'iterations' has the wrong type") != std::string::npos);
  }

  TEST_CASE("sigma arrays must match the cost count") {
    json doc = base_doc();
    doc["surrogate"]["sigma"] = {1.0, 2.0, 3.0};
    CHECK(error_of(doc).find("sigma array needs 2 entries") != std::string::npos);
    doc["surrogate"]["sigma"] = {1.0, 2.0};
    CHECK(parse_config(doc).driver.sigmas[1] == 2.0);
  }

  TEST_CASE("init_std_fraction sets the initial log std") {
    json doc = base_doc();
    doc["policy"] = {{"hidden", {4}}, {"init_std_fraction", 0.1}};
    const RunConfig c = parse_config(doc);
    auto env = make_environment(c, 1);
    const GaussianMlpPolicy pol = make_policy(c, env->spec());
    const PolicyParams p = make_initial_params(c, pol, 1, 0);
    const auto off = static_cast<Eigen::Index>(pol.log_std_offset());
    for (Eigen::Index i = 0; i < 2; ++i) CHECK(std::exp(p[off + i]) == doctest::Approx(0.1 * 2.0));
    doc["policy"]["init_std_fraction"] = 0.0;
    CHECK(error_of(doc).find("init_std_fraction must be positive") != std::string::npos);
  }

  TEST_CASE("canonical form round trips") {
    for (const std::string id : {"lqr", "mimo", "tabular"}) {
      json doc = base_doc();
      doc["env"] = {{"id", id}};
      if (id == "tabular") doc["env"]["limits"] = {0.4};
      doc["estimator"]["variant"] = "no_replay";
      doc["schedule"]["beta_fixed"] = 0.5;
      doc["solver"] = {{"method", "subgradient"}, {"max_iterations", 77}};
      doc["output"] = {{"name", "x"}, {"baseline_steps", 500}};
      const RunConfig c = parse_config(doc);
      const json canon = to_json(c);
      CHECK(to_json(parse_config(canon)) == canon);
      CHECK(canon["env"]["id"] == id);
      CHECK(canon["solver"]["max_iterations"] == 77);
    }
  }

  TEST_CASE("load_config reads files and reports bad JSON") {
    const auto dir = testing::scratch_dir("config_load");
    std::ofstream(dir / "good.cfg") << base_doc().dump(2);
    std::ofstream(dir / "bad.cfg") << "{ \"env\": ";
    CHECK(load_config(dir / "good.cfg").output.name == "good");
    CHECK_THROWS_AS(load_config(dir / "bad.cfg"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "absent.cfg"), ConfigError);
  }

  TEST_CASE("instance seeds and environment construction") {
    json doc = base_doc();
    RunConfig c = parse_config(doc);
    CHECK(instance_seed(c, 3) != instance_seed(c, 4));
    doc["env"]["instance_seed"] = 9;
    c = parse_config(doc);
    CHECK(instance_seed(c, 3) == instance_seed(c, 4));
    const auto env = make_environment(c, 3);
    CHECK(env->spec().state_dim == 4);
    CHECK(env->spec().limits[0] == 3.0);

    doc = base_doc();
    doc["env"] = {{"id", "mimo"}, {"n_tx", 4}, {"n_users", 2}};
    c = parse_config(doc);
    const auto mimo = make_environment(c, 1);
    CHECK(mimo->spec().action_box.dim() == 3);
    CHECK(mimo->spec().limits.size() == 2);
  }
}
