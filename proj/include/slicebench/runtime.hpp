#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <vector>

#include "slicebench/agent.hpp"
#include "slicebench/environment.hpp"
#include "slicebench/replay.hpp"

namespace slicebench::runtime {

enum class Mode { kSync, kAsync };
enum class ReplayKind { kUniform, kPrioritized };

struct RunConfig {
  std::uint64_t total_timesteps = 100000;
  std::uint64_t start_timesteps = 10000;
  std::uint64_t eval_interval = 20000;
  std::size_t eval_episodes = 5;
  std::size_t eval_top_k = 3;
  Mode mode = Mode::kSync;
  std::size_t actors = 3;
  std::size_t buffers = 2;
  std::size_t learners = 3;
  /// Async only: actor and learner alternate strictly and the actor acts on the newest snapshot (requires 1/1/1).
  bool lockstep = false;
  std::size_t snapshot_refresh = 50;
  ReplayKind replay = ReplayKind::kPrioritized;
  std::size_t replay_capacity = 1000000;
  double priority_alpha = 0.6;
  double priority_beta0 = 0.4;
  replay::ShardPolicy shard_policy = replay::ShardPolicy::kRoundRobin;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

struct SliceSummary {
  double admission_rate = 0.0;
  double latency = 0.0;
  double cpu_utilization = 0.0;
  double energy = 0.0;
};

/// Per-episode averages of the step information (the return is a sum).
struct EpisodeSummary {
  double episode_return = 0.0;
  std::size_t steps = 0;
  double objective = 0.0;
  double compute = 0.0;
  double energy = 0.0;
  double delay = 0.0;
  double admission_rate = 0.0;
  std::vector<SliceSummary> slices;

  void add(const StepOutcome& out);
  void finish();
};

struct EpisodeRecord {
  std::uint64_t timestep = 0;  // env steps completed when the episode ended
  std::uint64_t episode = 0;
  std::size_t actor = 0;
  EpisodeSummary summary;
};

struct EvalResult {
  double score = 0.0;
  std::vector<double> returns;
  std::vector<EpisodeSummary> episodes;
  EpisodeSummary mean;
};

struct EvalRecord {
  std::uint64_t timestep = 0;
  std::uint64_t version = 0;
  EvalResult result;
};

struct UpdateRecord {
  std::uint64_t index = 0;  // 1-based count of applied critic updates
  agent::Diagnostics diag;
};

/// Receives progress events. Calls are serialized by the runtime.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_episode(const EpisodeRecord&) {}
  virtual void on_eval(const EvalRecord&) {}
  virtual void on_update(const UpdateRecord&) {}
  /// Parameters that were just evaluated at `timestep`.
  virtual void on_checkpoint(std::uint64_t /*timestep*/, const agent::ActorCriticAgent&) {}
};

using EnvFactory = std::function<std::unique_ptr<Environment>()>;

struct RunResult {
  std::vector<EvalRecord> evals;
  std::uint64_t env_steps = 0;
  std::uint64_t episodes = 0;
  std::uint64_t transitions_pushed = 0;
  std::uint64_t critic_updates = 0;
  std::uint64_t actor_updates = 0;
  std::uint64_t snapshot_version = 0;
  std::uint64_t snapshot_reads = 0;
  std::uint64_t torn_snapshots = 0;
  std::uint64_t stale_priority_updates = 0;
  double wall_seconds = 0.0;
};

/// Mean of the k largest values (all of them when fewer than k).
double top_k_mean(std::vector<double> values, std::size_t k);

/// Seeds of the evaluation episodes; identical at every evaluation of a run.
std::vector<std::uint64_t> eval_seeds(std::uint64_t root, std::size_t episodes);

/// Runs noiseless episodes with the given actor and scores the best k returns.
EvalResult evaluate(const nn::Mlp& actor, Environment& env, const std::vector<std::uint64_t>& seeds,
                    std::size_t top_k);

/// Versioned immutable parameter snapshot with an embedded checksum.
struct Snapshot {
  std::uint64_t version = 0;
  std::shared_ptr<const agent::ActorCriticAgent> agent;
  std::uint64_t checksum = 0;

  bool intact() const;
};

/// Latest published parameters. Readers always get a complete snapshot.
class SharedMemory {
 public:
  explicit SharedMemory(std::shared_ptr<const agent::ActorCriticAgent> initial);

  std::shared_ptr<const Snapshot> read() const;
  /// Publishes a new snapshot with version = previous + 1 and returns that version.
  std::uint64_t publish(std::shared_ptr<const agent::ActorCriticAgent> agent);
  std::uint64_t version() const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> current_;
};

std::unique_ptr<replay::ReplayBuffer> make_replay(const RunConfig& config, std::size_t state_dim,
                                                  std::size_t action_dim);

/// Single-threaded reference loop. Fully deterministic given the seed.
RunResult run_sync(const RunConfig& config, agent::ActorCriticAgent& agent, const EnvFactory& make_env,
                   Observer* observer = nullptr);

/// Actor-learner deployment. On return `agent` holds the final master parameters.
RunResult run_async(const RunConfig& config, agent::ActorCriticAgent& agent, const EnvFactory& make_env,
                    Observer* observer = nullptr);

RunResult run(const RunConfig& config, agent::ActorCriticAgent& agent, const EnvFactory& make_env,
              Observer* observer = nullptr);

}  // namespace slicebench::runtime
