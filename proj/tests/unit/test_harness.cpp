#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slicebench/config.hpp"
#include "slicebench/errors.hpp"
#include "slicebench/metrics.hpp"
#include "slicebench/toy_env.hpp"

using namespace slicebench;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    config::parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("slicebench-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("serialization round trips exactly") {
  for (const char* name : {"desk", "paper"}) {
    const auto c = config::preset(name);
    const auto text = config::serialize(c);
    const auto back = config::parse(text);
    CHECK(back == c);
    CHECK(config::serialize(back) == text);
  }
  auto odd = config::desk_preset();
  odd.env.weights.w2 = 0.1 + 0.2;
  odd.dtd3.actor_lr = 3.0e-7;
  odd.runtime.seed = 18446744073709551615ULL;
  odd.agent = config::AgentKind::kDdpg;
  odd.ddpg.noise = agent::NoiseKind::kOrnsteinUhlenbeck;
  CHECK(config::parse(config::serialize(odd)) == odd);
}

TEST_CASE("shipped config files equal the built-in presets") {
  const fs::path root = SLICEBENCH_SOURCE_DIR;
  CHECK(config::load((root / "configs" / "desk.cfg").string()) == config::desk_preset());
  CHECK(config::load((root / "configs" / "paper.cfg").string()) == config::paper_preset());
}

TEST_CASE("preset contents") {
  const auto desk = config::desk_preset();
  CHECK(desk.env.n_aps == 16);
  CHECK(desk.env.n_subscribers == 8);
  CHECK(desk.env.slices.size() == 3);
  CHECK(desk.runtime.total_timesteps == 100000);
  const auto paper = config::paper_preset();
  CHECK(paper.env.n_aps == 150);
  CHECK(paper.env.n_subscribers == 50);
  CHECK(paper.runtime.total_timesteps == 2000000);
  CHECK_THROWS_AS(config::preset("laptop"), ConfigError);
}

TEST_CASE("missing and unknown keys name their path") {
  const auto text = config::serialize(config::desk_preset());
  CHECK(error_of(replace_once(text, "    n_aps: 16\n", "")).find("env.topology.n_aps") != std::string::npos);
  CHECK(error_of(replace_once(text, "    n_aps: 16\n", "    n_aps: 16\n    n_apz: 3\n")).find("unknown config key 'env.topology.n_apz'") !=
        std::string::npos);
  CHECK(error_of(replace_once(text, "    gamma: 0.99\n", "")).find("agents.dtd3.gamma") != std::string::npos);
  CHECK(error_of(replace_once(text, "  seed: 0", "  seed: -3")).find("runtime.seed") != std::string::npos);
  CHECK(error_of(replace_once(text, "activation: gelu", "activation: swish")).find("swish") != std::string::npos);
  CHECK(error_of("").find("empty") != std::string::npos);
  CHECK(error_of("env: [1, 2").find("YAML") != std::string::npos);
}

TEST_CASE("semantic validation rejects inconsistent configs") {
  auto c = config::desk_preset();
  c.runtime.eval_interval = c.runtime.total_timesteps + 1;
  CHECK_THROWS_AS(config::parse(config::serialize(c)), ConfigError);
  c = config::desk_preset();
  c.dtd3.gamma = 0.0;
  CHECK_THROWS_AS(config::parse(config::serialize(c)), ConfigError);
  CHECK_THROWS_AS(config::load("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("config hash is stable and sensitive") {
  const auto a = config::desk_preset();
  auto b = a;
  CHECK(config::config_hash(a) == config::config_hash(b));
  CHECK(std::regex_match(config::config_hash(a), std::regex("[0-9a-f]{16}")));
  b.runtime.seed = 1;
  CHECK(config::config_hash(a) != config::config_hash(b));
}

TEST_CASE("run config and agent factory follow the selected agent") {
  auto c = config::desk_preset();
  CHECK(config::run_config(c).replay == runtime::ReplayKind::kPrioritized);
  c.agent = config::AgentKind::kTd3;
  CHECK(config::run_config(c).replay == runtime::ReplayKind::kUniform);
  c.td3.hidden = {4};
  CHECK(config::make_agent(c, 18, 6, 1)->name() == "td3");
  c.agent = config::AgentKind::kDdpg;
  c.ddpg.hidden = {4};
  CHECK(config::make_agent(c, 18, 6, 1)->name() == "ddpg");
  CHECK(config::to_string(config::parse_agent("dtd3")) == "dtd3");
  CHECK_THROWS_AS(config::parse_agent("sac"), ConfigError);
  CHECK_THROWS_AS(config::parse_mode("batch"), ConfigError);
}

TEST_CASE("moving average") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  CHECK(metrics::moving_average(v, 1) == v);
  const auto m = metrics::moving_average(v, 2);
  CHECK(m == std::vector<double>{1.0, 1.5, 2.5, 3.5});
  const auto w = metrics::moving_average(v, 10);
  CHECK(w.back() == doctest::Approx(2.5));
}

TEST_CASE("curves aggregate over seeds at shared timesteps") {
  std::vector<std::vector<metrics::EvalPoint>> runs{
      {{0, 1.0}, {10, 2.0}, {20, 3.0}},
      {{0, 3.0}, {10, 4.0}, {20, 5.0}},
      {{0, 2.0}, {10, 0.0}}};
  const auto curve = metrics::aggregate(runs, 1);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].mean == doctest::Approx(2.0));
  CHECK(curve[0].min == 1.0);
  CHECK(curve[0].max == 3.0);
  CHECK(curve[1].mean == doctest::Approx(2.0));
  CHECK(curve[1].runs == 3);
  const auto smooth = metrics::aggregate(runs, 2);
  CHECK(smooth[1].mean == doctest::Approx((1.5 + 3.5 + 1.0) / 3.0));
}

TEST_CASE("recorder, manifest, checkpoints and eval files") {
  const fs::path dir = scratch("recorder");
  auto c = config::desk_preset();
  c.dtd3.hidden = {8};
  c.dtd3.batch_size = 8;
  c.runtime.total_timesteps = 200;
  c.runtime.start_timesteps = 20;
  c.runtime.eval_interval = 100;
  c.runtime.eval_episodes = 2;
  c.runtime.eval_top_k = 1;
  auto agent = config::make_agent(c, 2, 1, 3);
  runtime::RunResult result;
  {
    metrics::CsvRecorder rec(dir, {"A", "B", "C"}, 10);
    result = runtime::run(config::run_config(c), *agent,
                          [] { return std::make_unique<ToyMdp>(); }, &rec);
  }
  metrics::write_manifest(dir, c, result);

  const auto evals = metrics::read_evals(dir);
  REQUIRE(evals.size() == 3);
  CHECK(evals[2].timestep == 200);
  CHECK(evals[2].score == doctest::Approx(result.evals[2].result.score).epsilon(1e-9));
  CHECK(fs::exists(dir / "checkpoints" / "t100.bin"));

  std::ifstream episodes(dir / "metrics.csv");
  std::string header;
  std::getline(episodes, header);
  CHECK(header.find("A_admission,A_latency,A_cpu_util,A_energy") != std::string::npos);
  std::size_t rows = 0;
  for (std::string line; std::getline(episodes, line);) ++rows;
  CHECK(rows == result.episodes);

  std::ifstream diag(dir / "diagnostics.csv");
  rows = 0;
  for (std::string line; std::getline(diag, line);) ++rows;
  CHECK(rows == 1 + result.critic_updates / 10);

  std::ifstream mf(dir / "manifest.json");
  const auto j = nlohmann::json::parse(mf);
  CHECK(j["config_hash"] == config::config_hash(c));
  CHECK(j["code_version"] == metrics::code_version());
  CHECK(j["env_steps"] == 200);

  auto restored = config::make_agent(c, 2, 1, 99);
  metrics::load_checkpoint(dir / "checkpoints" / "t200.bin", *restored);
  CHECK(restored->checksum() == agent->checksum());
  CHECK_THROWS_AS(metrics::load_checkpoint(dir / "missing.bin", *restored), CheckpointError);

  metrics::write_curve(dir / "curve.csv", metrics::aggregate({evals, evals}, 1));
  std::ifstream curve(dir / "curve.csv");
  std::getline(curve, header);
  CHECK(header == "timestep,mean,min,max,runs");
  fs::remove_all(dir);
}
