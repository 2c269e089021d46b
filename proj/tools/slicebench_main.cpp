#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slicebench/config.hpp"
#include "slicebench/env.hpp"
#include "slicebench/errors.hpp"
#include "slicebench/metrics.hpp"
#include "slicebench/runtime.hpp"

namespace fs = std::filesystem;
using namespace slicebench;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct Selection {
  std::string config_path;
  std::string preset_name;
  std::optional<std::string> agent;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> timesteps;
};

void add_selection(CLI::App* cmd, Selection& s) {
  auto* cfg = cmd->add_option("-c,--config", s.config_path, "YAML config file");
  cmd->add_option("-p,--preset", s.preset_name, "Built-in preset (paper or desk)")->excludes(cfg);
  cmd->add_option("--agent", s.agent, "Override the agent (dtd3, td3, ddpg)");
  cmd->add_option("--mode", s.mode, "Override the runtime mode (sync, async)");
  cmd->add_option("--seed", s.seed, "Override the root seed");
  cmd->add_option("--timesteps", s.timesteps, "Override total environment steps");
}

config::ExperimentConfig resolve(const Selection& s) {
  config::ExperimentConfig c = s.config_path.empty() ? config::preset(s.preset_name.empty() ? "desk" : s.preset_name)
                                                     : config::load(s.config_path);
  if (s.agent) c.agent = config::parse_agent(*s.agent);
  if (s.mode) c.runtime.mode = config::parse_mode(*s.mode);
  if (s.seed) c.runtime.seed = *s.seed;
  if (s.timesteps) c.runtime.total_timesteps = *s.timesteps;
  c.validate();
  return c;
}

fs::path default_out_dir(const config::ExperimentConfig& c) {
  const char* env = std::getenv("SLICEBENCH_OUT");
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  return root / (std::string(config::to_string(c.agent)) + "-" + std::string(config::to_string(c.runtime.mode)) +
                 "-seed" + std::to_string(c.runtime.seed));
}

runtime::EnvFactory env_factory(const env::EnvConfig& cfg) {
  return [cfg] { return std::make_unique<env::SliceEnv>(cfg); };
}

std::vector<std::string> slice_names(const env::EnvConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& s : cfg.slices) names.push_back(s.name);
  return names;
}

int train(const Selection& sel, std::string out_arg, std::uint64_t diag_every, bool time_seed) {
  auto cfg = resolve(sel);
  if (time_seed)
    cfg.runtime.seed = static_cast<std::uint64_t>(std::chrono::system_clock::now().time_since_epoch().count());
  const fs::path out = out_arg.empty() ? default_out_dir(cfg) : fs::path(out_arg);
  fs::create_directories(out);
  {
    std::ofstream f(out / "config.cfg");
    f << config::serialize(cfg);
  }
  env::SliceEnv probe(cfg.env);
  auto agent = config::make_agent(cfg, probe.observation_spec().size(), probe.action_spec().size(), cfg.runtime.seed);
  metrics::CsvRecorder recorder(out, slice_names(cfg.env), diag_every);
  std::cerr << "training " << config::to_string(cfg.agent) << " (" << config::to_string(cfg.runtime.mode)
            << ", seed " << cfg.runtime.seed << ", " << cfg.runtime.total_timesteps << " steps) -> " << out.string()
            << '\n';
  const auto result = runtime::run(config::run_config(cfg), *agent, env_factory(cfg.env), &recorder);
  recorder.flush();
  metrics::save_checkpoint(out / "checkpoint.bin", *agent);
  metrics::write_manifest(out, cfg, result);
  for (const auto& e : result.evals)
    std::cout << "t=" << e.timestep << " score=" << e.result.score << '\n';
  std::cout << "done in " << result.wall_seconds << " s, " << result.critic_updates << " critic updates\n";
  return kOk;
}

struct EvalRow {
  std::string run;
  std::string agent;
  runtime::EvalResult result;
};

EvalRow eval_run(const fs::path& dir, std::size_t episodes) {
  const auto cfg = config::load((dir / "config.cfg").string());
  std::ifstream mf(dir / "manifest.json");
  if (mf) {
    const auto manifest = nlohmann::json::parse(mf);
    if (manifest.value("code_version", "") != metrics::code_version())
      throw CheckpointError("run '" + dir.string() + "' was written by version " +
                            manifest.value("code_version", "?") + ", this is " + metrics::code_version());
    if (manifest.value("config_hash", "") != config::config_hash(cfg))
      throw CheckpointError("config.cfg in '" + dir.string() + "' does not match its manifest");
  }
  env::SliceEnv env(cfg.env);
  auto agent = config::make_agent(cfg, env.observation_spec().size(), env.action_spec().size(), cfg.runtime.seed);
  metrics::load_checkpoint(dir / "checkpoint.bin", *agent);
  const std::size_t n = episodes ? episodes : cfg.runtime.eval_episodes;
  const std::size_t k = std::min(cfg.runtime.eval_top_k, n);
  auto result = runtime::evaluate(agent->actor(), env, runtime::eval_seeds(cfg.runtime.seed, n), k);

  nlohmann::json j;
  j["score"] = result.score;
  j["returns"] = result.returns;
  j["objective"] = result.mean.objective;
  j["compute"] = result.mean.compute;
  j["energy"] = result.mean.energy;
  j["delay"] = result.mean.delay;
  j["admission_rate"] = result.mean.admission_rate;
  for (std::size_t l = 0; l < result.mean.slices.size() && l < cfg.env.slices.size(); ++l) {
    const auto& s = result.mean.slices[l];
    j["slices"][cfg.env.slices[l].name] = {{"admission_rate", s.admission_rate},
                                           {"latency", s.latency},
                                           {"cpu_utilization", s.cpu_utilization},
                                           {"energy", s.energy}};
  }
  std::ofstream(dir / "eval.json") << j.dump(2) << '\n';
  return {dir.string(), std::string(config::to_string(cfg.agent)), std::move(result)};
}

int eval(const std::vector<std::string>& run_dirs, std::size_t episodes) {
  std::vector<EvalRow> rows;
  for (const auto& d : run_dirs) rows.push_back(eval_run(d, episodes));
  std::cout << std::fixed << std::setprecision(5);
  for (const auto& row : rows) {
    std::cout << row.run << " (" << row.agent << ") score " << row.result.score << '\n';
    std::cout << "  slice  admission  latency    cpu_util   energy\n";
    for (std::size_t l = 0; l < row.result.mean.slices.size(); ++l) {
      const auto& s = row.result.mean.slices[l];
      std::cout << "  " << std::setw(5) << l << "  " << std::setw(9) << s.admission_rate << "  " << std::setw(9)
                << s.latency << "  " << std::setw(9) << s.cpu_utilization << "  " << std::setw(9) << s.energy
                << '\n';
    }
  }
  if (rows.size() > 1) {
    std::cout << "\nrun,agent,score,objective,admission_rate\n";
    for (const auto& row : rows)
      std::cout << row.run << ',' << row.agent << ',' << row.result.score << ',' << row.result.mean.objective << ','
                << row.result.mean.admission_rate << '\n';
  }
  return kOk;
}

int export_curves(const std::vector<std::string>& runs, const std::string& output, std::size_t window) {
  std::vector<std::vector<metrics::EvalPoint>> curves;
  for (const auto& r : runs) curves.push_back(metrics::read_evals(r));
  const auto curve = metrics::aggregate(curves, window);
  metrics::write_curve(output, curve);
  std::cout << "wrote " << curve.size() << " points from " << runs.size() << " runs to " << output << '\n';
  return kOk;
}

int validate(const Selection& sel) {
  const auto cfg = resolve(sel);
  std::cout << "ok " << config::config_hash(cfg) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-free network slicing benchmark"};
  app.require_subcommand(1);

  Selection train_sel, validate_sel;
  std::string out_dir;
  std::uint64_t diag_every = 100;
  auto* train_cmd = app.add_subcommand("train", "Train an agent and record metrics");
  add_selection(train_cmd, train_sel);
  train_cmd->add_option("-o,--out-dir", out_dir, "Output directory (default $SLICEBENCH_OUT/<run>)");
  bool time_seed = false;
  train_cmd->add_flag("--time-seed", time_seed, "Seed from the system clock instead of the config");
  train_cmd->add_option("--diag-every", diag_every, "Record learner diagnostics every N updates (0 disables)");

  std::vector<std::string> eval_dirs;
  std::size_t episodes = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate trained checkpoints");
  eval_cmd->add_option("run_dirs", eval_dirs, "Directories written by train")->required();
  eval_cmd->add_option("-n,--episodes", episodes, "Evaluation episodes (default from config)");

  std::vector<std::string> runs;
  std::string output = "curve.csv";
  std::size_t window = 1;
  auto* export_cmd = app.add_subcommand("export", "Aggregate evaluation curves across runs");
  export_cmd->add_option("runs", runs, "Run directories")->required();
  export_cmd->add_option("-o,--output", output, "Output CSV");
  export_cmd->add_option("-w,--window", window, "Moving-average window in evaluations");

  auto* validate_cmd = app.add_subcommand("validate-config", "Check a config and print its hash");
  add_selection(validate_cmd, validate_sel);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) return train(train_sel, out_dir, diag_every, time_seed);
    if (*eval_cmd) return eval(eval_dirs, episodes);
    if (*export_cmd) return export_curves(runs, output, window);
    if (*validate_cmd) return validate(validate_sel);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}
