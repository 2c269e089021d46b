#include "slicebench/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "slicebench/env.hpp"
#include "slicebench/errors.hpp"

#ifndef SLICEBENCH_VERSION
#define SLICEBENCH_VERSION "0.0.0"
#endif

namespace slicebench::metrics {

namespace {

std::ofstream open_csv(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << std::setprecision(10);
  return out;
}

}  // namespace

CsvRecorder::CsvRecorder(const fs::path& out_dir, std::vector<std::string> slice_names, std::uint64_t diag_every)
    : out_dir_(out_dir), slices_(std::move(slice_names)), diag_every_(diag_every), start_(std::chrono::steady_clock::now()) {
  fs::create_directories(out_dir);
  episodes_ = open_csv(out_dir / "metrics.csv");
  evals_ = open_csv(out_dir / "evals.csv");
  diagnostics_ = open_csv(out_dir / "diagnostics.csv");
  timing_ = open_csv(out_dir / "timing.csv");

  episodes_ << "timestep,episode,actor,return,steps,objective,compute,energy,delay,admission_rate";
  for (const auto& s : slices_)
    episodes_ << ',' << s << "_admission," << s << "_latency," << s << "_cpu_util," << s << "_energy";
  episodes_ << '\n';
  evals_ << "timestep,version,score,mean_return,objective,compute,energy,delay,admission_rate\n";
  diagnostics_ << "update,critic_loss,q_mean,sigma_min,sigma_max,target_gap_max,targets_clipped,"
                  "critic_grad_norm,actor_objective,actor_grad_norm,finite\n";
  timing_ << "timestep,wall_seconds\n";
}

void CsvRecorder::on_episode(const runtime::EpisodeRecord& rec) {
  const auto& s = rec.summary;
  episodes_ << rec.timestep << ',' << rec.episode << ',' << rec.actor << ',' << s.episode_return << ','
            << s.steps << ',' << s.objective << ',' << s.compute << ',' << s.energy << ',' << s.delay << ','
            << s.admission_rate;
  for (std::size_t l = 0; l < slices_.size(); ++l) {
    const runtime::SliceSummary sl = l < s.slices.size() ? s.slices[l] : runtime::SliceSummary{};
    episodes_ << ',' << sl.admission_rate << ',' << sl.latency << ',' << sl.cpu_utilization << ',' << sl.energy;
  }
  episodes_ << '\n';
}

void CsvRecorder::on_eval(const runtime::EvalRecord& rec) {
  const auto& r = rec.result;
  double mean_return = 0.0;
  for (double v : r.returns) mean_return += v;
  if (!r.returns.empty()) mean_return /= static_cast<double>(r.returns.size());
  evals_ << rec.timestep << ',' << rec.version << ',' << r.score << ',' << mean_return << ',' << r.mean.objective
         << ',' << r.mean.compute << ',' << r.mean.energy << ',' << r.mean.delay << ',' << r.mean.admission_rate
         << '\n';
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  timing_ << rec.timestep << ',' << elapsed << '\n';
  flush();
}

void CsvRecorder::on_update(const runtime::UpdateRecord& rec) {
  if (diag_every_ == 0 || rec.index % diag_every_ != 0) return;
  const auto& d = rec.diag;
  diagnostics_ << rec.index << ',' << d.critic_loss << ',' << d.q_mean << ',' << d.sigma_min << ',' << d.sigma_max
               << ',' << d.target_gap_max << ',' << d.targets_clipped << ',' << d.critic_grad_norm << ','
               << d.actor_objective << ',' << d.actor_grad_norm << ',' << (d.finite ? 1 : 0) << '\n';
}

void CsvRecorder::on_checkpoint(std::uint64_t timestep, const agent::ActorCriticAgent& agent) {
  fs::create_directories(out_dir_ / "checkpoints");
  save_checkpoint(out_dir_ / "checkpoints" / ("t" + std::to_string(timestep) + ".bin"), agent);
}

void CsvRecorder::flush() {
  episodes_.flush();
  evals_.flush();
  diagnostics_.flush();
  timing_.flush();
}

std::string code_version() { return SLICEBENCH_VERSION; }

void save_checkpoint(const fs::path& path, const agent::ActorCriticAgent& agent) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  agent.save(out);
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

void load_checkpoint(const fs::path& path, agent::ActorCriticAgent& agent) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint not found: '" + path.string() + "'");
  agent.load(in);
}

void write_manifest(const fs::path& out_dir, const config::ExperimentConfig& config,
                    const runtime::RunResult& result) {
  nlohmann::json j;
  j["config_hash"] = config::config_hash(config);
  j["seed"] = config.runtime.seed;
  j["code_version"] = code_version();
  j["agent"] = std::string(config::to_string(config.agent));
  j["mode"] = std::string(config::to_string(config.runtime.mode));
  j["preset"] = config.preset;
  j["env_id"] = std::string(env::SliceEnv::kId);
  j["config_file"] = "config.cfg";
  j["env_steps"] = result.env_steps;
  j["episodes"] = result.episodes;
  j["critic_updates"] = result.critic_updates;
  j["actor_updates"] = result.actor_updates;
  j["snapshot_version"] = result.snapshot_version;
  j["torn_snapshots"] = result.torn_snapshots;
  j["stale_priority_updates"] = result.stale_priority_updates;
  if (!result.evals.empty()) {
    j["final_score"] = result.evals.back().result.score;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& e : result.evals) best = std::max(best, e.result.score);
    j["best_score"] = best;
  }
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in '" + out_dir.string() + "'");
  out << j.dump(2) << '\n';
}

std::vector<EvalPoint> read_evals(const fs::path& run_dir) {
  const fs::path path = run_dir / "evals.csv";
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  std::vector<EvalPoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string t, version, score;
    std::getline(row, t, ',');
    std::getline(row, version, ',');
    std::getline(row, score, ',');
    try {
      out.push_back({std::stoull(t), std::stod(score)});
    } catch (const std::exception&) {
      throw IoError("malformed row in '" + path.string() + "': " + line);
    }
  }
  return out;
}

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window == 0) window = 1;
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= window) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

std::vector<CurvePoint> aggregate(const std::vector<std::vector<EvalPoint>>& runs, std::size_t window) {
  std::map<std::uint64_t, std::vector<double>> by_step;
  for (const auto& run : runs) {
    std::vector<double> scores;
    for (const auto& p : run) scores.push_back(p.score);
    const auto smooth = moving_average(scores, window);
    for (std::size_t i = 0; i < run.size(); ++i) by_step[run[i].timestep].push_back(smooth[i]);
  }
  std::vector<CurvePoint> curve;
  for (const auto& [t, vals] : by_step) {
    if (vals.size() != runs.size()) continue;
    CurvePoint p;
    p.timestep = t;
    p.runs = vals.size();
    p.min = *std::min_element(vals.begin(), vals.end());
    p.max = *std::max_element(vals.begin(), vals.end());
    for (double v : vals) p.mean += v;
    p.mean /= static_cast<double>(vals.size());
    curve.push_back(p);
  }
  return curve;
}

void write_curve(const fs::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out = open_csv(path);
  out << "timestep,mean,min,max,runs\n";
  for (const auto& p : curve) out << p.timestep << ',' << p.mean << ',' << p.min << ',' << p.max << ',' << p.runs << '\n';
}

}  // namespace slicebench::metrics
