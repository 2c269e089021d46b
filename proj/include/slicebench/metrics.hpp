#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "slicebench/config.hpp"
#include "slicebench/runtime.hpp"

namespace slicebench::metrics {

namespace fs = std::filesystem;

/// Streams run progress into an output directory:
///   metrics.csv      one row per training episode
///   evals.csv        one row per evaluation
///   diagnostics.csv  learner diagnostics every `diag_every` updates
///   timing.csv       wall-clock per evaluation
///   checkpoints/     agent parameters at every evaluation
/// Everything except timing.csv is a deterministic function of the seed in sync mode.
class CsvRecorder final : public runtime::Observer {
 public:
  CsvRecorder(const fs::path& out_dir, std::vector<std::string> slice_names, std::uint64_t diag_every = 100);

  void on_episode(const runtime::EpisodeRecord& rec) override;
  void on_eval(const runtime::EvalRecord& rec) override;
  void on_update(const runtime::UpdateRecord& rec) override;
  void on_checkpoint(std::uint64_t timestep, const agent::ActorCriticAgent& agent) override;

  void flush();

 private:
  fs::path out_dir_;
  std::vector<std::string> slices_;
  std::uint64_t diag_every_;
  std::ofstream episodes_;
  std::ofstream evals_;
  std::ofstream diagnostics_;
  std::ofstream timing_;
  std::chrono::steady_clock::time_point start_;
};

std::string code_version();

void save_checkpoint(const fs::path& path, const agent::ActorCriticAgent& agent);
void load_checkpoint(const fs::path& path, agent::ActorCriticAgent& agent);

void write_manifest(const fs::path& out_dir, const config::ExperimentConfig& config,
                    const runtime::RunResult& result);

struct EvalPoint {
  std::uint64_t timestep = 0;
  double score = 0.0;
};

std::vector<EvalPoint> read_evals(const fs::path& run_dir);

/// Trailing moving average over `window` points (shorter at the start).
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);

struct CurvePoint {
  std::uint64_t timestep = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t runs = 0;
};

/// Smooths each run's eval curve, then aggregates across runs at every
/// timestep present in all of them.
std::vector<CurvePoint> aggregate(const std::vector<std::vector<EvalPoint>>& runs, std::size_t window);

void write_curve(const fs::path& path, const std::vector<CurvePoint>& curve);

}  // namespace slicebench::metrics
