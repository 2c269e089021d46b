#include "slicebench/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <exception>
#include <functional>
#include <string>
#include <thread>

#include "slicebench/errors.hpp"
#include "slicebench/rng.hpp"

namespace slicebench::runtime {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t episode_seed(std::uint64_t root, std::size_t actor, std::uint64_t episode) {
  return derive_seed(root, "train/" + std::to_string(actor) + "/" + std::to_string(episode));
}

replay::Transition make_transition(const std::vector<double>& obs, std::vector<double> action,
                                   const StepOutcome& out) {
  replay::Transition t;
  t.state = obs;
  t.action = std::move(action);
  t.reward = out.reward;
  t.next_state = out.observation;
  t.terminal = out.done && !out.time_limit;
  return t;
}

}  // namespace

void RunConfig::validate() const {
  if (eval_interval == 0) throw ConfigError("runtime.eval_interval must be positive");
  if (total_timesteps > 0 && eval_interval > total_timesteps)
    throw ConfigError("runtime.eval_interval must not exceed runtime.total_timesteps");
  if (eval_episodes < 1) throw ConfigError("runtime.eval_episodes must be >= 1");
  if (eval_top_k < 1 || eval_top_k > eval_episodes)
    throw ConfigError("runtime.eval_top_k must be in [1, eval_episodes]");
  if (actors < 1 || buffers < 1 || learners < 1)
    throw ConfigError("runtime actor, buffer and learner counts must be >= 1");
  if (lockstep && (actors != 1 || buffers != 1 || learners != 1))
    throw ConfigError("runtime.lockstep requires one actor, one buffer and one learner");
  if (snapshot_refresh < 1) throw ConfigError("runtime.snapshot_refresh must be >= 1");
  if (replay_capacity < 1) throw ConfigError("runtime.replay_capacity must be >= 1");
  if (!(priority_alpha >= 0.0)) throw ConfigError("runtime.priority_alpha must be >= 0");
  if (!(priority_beta0 >= 0.0 && priority_beta0 <= 1.0))
    throw ConfigError("runtime.priority_beta0 must be in [0, 1]");
}

void EpisodeSummary::add(const StepOutcome& out) {
  episode_return += out.reward;
  ++steps;
  objective += out.info.objective;
  compute += out.info.compute;
  energy += out.info.energy;
  delay += out.info.delay;
  admission_rate += out.info.admission_rate;
  if (slices.size() < out.info.slices.size()) slices.resize(out.info.slices.size());
  for (std::size_t l = 0; l < out.info.slices.size(); ++l) {
    const auto& s = out.info.slices[l];
    slices[l].admission_rate += s.admission_rate;
    slices[l].latency += s.latency;
    slices[l].cpu_utilization += s.cpu_utilization;
    slices[l].energy += s.energy;
  }
}

void EpisodeSummary::finish() {
  if (steps == 0) return;
  const double n = static_cast<double>(steps);
  objective /= n;
  compute /= n;
  energy /= n;
  delay /= n;
  admission_rate /= n;
  for (auto& s : slices) {
    s.admission_rate /= n;
    s.latency /= n;
    s.cpu_utilization /= n;
    s.energy /= n;
  }
}

double top_k_mean(std::vector<double> values, std::size_t k) {
  if (values.empty()) throw InsufficientData("top_k_mean of an empty set");
  std::sort(values.begin(), values.end(), std::greater<>());
  const std::size_t n = std::min(k, values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

std::vector<std::uint64_t> eval_seeds(std::uint64_t root, std::size_t episodes) {
  std::vector<std::uint64_t> seeds(episodes);
  for (std::size_t i = 0; i < episodes; ++i) seeds[i] = derive_seed(root, "eval/" + std::to_string(i));
  return seeds;
}

EvalResult evaluate(const nn::Mlp& actor, Environment& env, const std::vector<std::uint64_t>& seeds,
                    std::size_t top_k) {
  EvalResult r;
  const BoxSpec box = env.action_spec();
  for (std::uint64_t seed : seeds) {
    std::vector<double> obs = env.reset(seed);
    EpisodeSummary summary;
    for (;;) {
      const std::vector<double> unit = agent::policy_action(actor, obs);
      StepOutcome out = env.step(box.from_unit(unit));
      summary.add(out);
      obs = std::move(out.observation);
      if (out.done) break;
    }
    summary.finish();
    r.returns.push_back(summary.episode_return);
    r.episodes.push_back(std::move(summary));
  }
  r.score = top_k_mean(r.returns, top_k);

  const double n = static_cast<double>(r.episodes.size());
  for (const auto& e : r.episodes) {
    r.mean.episode_return += e.episode_return / n;
    r.mean.steps += e.steps;
    r.mean.objective += e.objective / n;
    r.mean.compute += e.compute / n;
    r.mean.energy += e.energy / n;
    r.mean.delay += e.delay / n;
    r.mean.admission_rate += e.admission_rate / n;
    if (r.mean.slices.size() < e.slices.size()) r.mean.slices.resize(e.slices.size());
    for (std::size_t l = 0; l < e.slices.size(); ++l) {
      r.mean.slices[l].admission_rate += e.slices[l].admission_rate / n;
      r.mean.slices[l].latency += e.slices[l].latency / n;
      r.mean.slices[l].cpu_utilization += e.slices[l].cpu_utilization / n;
      r.mean.slices[l].energy += e.slices[l].energy / n;
    }
  }
  return r;
}

bool Snapshot::intact() const { return agent && agent->checksum() == checksum; }

SharedMemory::SharedMemory(std::shared_ptr<const agent::ActorCriticAgent> initial) {
  auto s = std::make_shared<Snapshot>();
  s->version = 0;
  s->checksum = initial->checksum();
  s->agent = std::move(initial);
  current_ = std::move(s);
}

std::shared_ptr<const Snapshot> SharedMemory::read() const {
  std::lock_guard lock(mu_);
  return current_;
}

std::uint64_t SharedMemory::publish(std::shared_ptr<const agent::ActorCriticAgent> agent) {
  auto s = std::make_shared<Snapshot>();
  s->checksum = agent->checksum();
  s->agent = std::move(agent);
  std::lock_guard lock(mu_);
  s->version = current_->version + 1;
  current_ = std::move(s);
  return current_->version;
}

std::uint64_t SharedMemory::version() const {
  std::lock_guard lock(mu_);
  return current_->version;
}

std::unique_ptr<replay::ReplayBuffer> make_replay(const RunConfig& config, std::size_t state_dim,
                                                  std::size_t action_dim) {
  const std::size_t shards = config.mode == Mode::kAsync ? config.buffers : 1;
  const std::size_t capacity = std::max<std::size_t>(1, config.replay_capacity / shards);
  auto one = [&]() -> std::unique_ptr<replay::ReplayBuffer> {
    if (config.replay == ReplayKind::kUniform)
      return std::make_unique<replay::UniformBuffer>(capacity, state_dim, action_dim);
    return std::make_unique<replay::PrioritizedBuffer>(
        capacity, state_dim, action_dim, replay::PrioritizedOptions{config.priority_alpha, config.priority_beta0});
  };
  if (shards == 1) return one();
  std::vector<std::unique_ptr<replay::ReplayBuffer>> parts;
  for (std::size_t i = 0; i < shards; ++i) parts.push_back(one());
  return std::make_unique<replay::ShardedReplay>(std::move(parts), config.shard_policy,
                                                 derive_seed(config.seed, "replay/route"));
}

RunResult run_sync(const RunConfig& config, agent::ActorCriticAgent& agent, const EnvFactory& make_env,
                   Observer* observer) {
  config.validate();
  const auto start = Clock::now();
  RunResult result;
  if (config.total_timesteps == 0) return result;

  auto env = make_env();
  auto eval_env = make_env();
  const BoxSpec box = env->action_spec();
  auto buffer = make_replay(config, agent.state_dim(), agent.action_dim());
  Rng actor_rng = make_rng(config.seed, "actor/0");
  Rng learner_rng = make_rng(config.seed, "learner/0");
  const auto seeds = eval_seeds(config.seed, config.eval_episodes);

  auto do_eval = [&](std::uint64_t t) {
    EvalRecord rec{t, agent.critic_updates(), evaluate(agent.actor(), *eval_env, seeds, config.eval_top_k)};
    if (observer) {
      observer->on_eval(rec);
      observer->on_checkpoint(t, agent);
    }
    result.evals.push_back(std::move(rec));
  };
  do_eval(0);

  agent::Explorer explorer(agent.exploration(), agent.action_dim());
  std::uint64_t episode = 0;
  std::vector<double> obs = env->reset(episode_seed(config.seed, 0, episode));
  EpisodeSummary summary;
  for (std::uint64_t t = 0; t < config.total_timesteps; ++t) {
    std::vector<double> unit = t < config.start_timesteps
                                   ? agent::uniform_action(agent.action_dim(), actor_rng)
                                   : explorer.perturb(agent.act(obs), actor_rng);
    StepOutcome out = env->step(box.from_unit(unit));
    buffer->push(make_transition(obs, std::move(unit), out));
    summary.add(out);
    obs = out.observation;

    if (t >= config.start_timesteps && buffer->size() >= agent.batch_size()) {
      buffer->set_beta(replay::annealed_beta(config.priority_beta0, t, config.total_timesteps));
      const agent::Diagnostics diag = agent.train_step(*buffer, learner_rng);
      if (observer) observer->on_update({agent.critic_updates(), diag});
    }
    if (out.done) {
      summary.finish();
      if (observer) observer->on_episode({t + 1, episode, 0, summary});
      summary = EpisodeSummary{};
      ++episode;
      obs = env->reset(episode_seed(config.seed, 0, episode));
      explorer.reset();
    }
    if ((t + 1) % config.eval_interval == 0) do_eval(t + 1);
  }

  result.env_steps = config.total_timesteps;
  result.episodes = episode;
  result.transitions_pushed = buffer->pushed();
  result.critic_updates = agent.critic_updates();
  result.actor_updates = agent.actor_updates();
  result.snapshot_version = agent.critic_updates();
  result.stale_priority_updates = buffer->stale_updates();
  result.wall_seconds = seconds_since(start);
  return result;
}

namespace {

/// State shared by the actor and learner threads of one async run.
class AsyncRun {
 public:
  AsyncRun(const RunConfig& config, agent::ActorCriticAgent& master, const EnvFactory& make_env,
           Observer* observer)
      : config_(config), master_(master), make_env_(make_env), observer_(observer),
        memory_(std::shared_ptr<const agent::ActorCriticAgent>(master.clone())),
        buffer_(make_replay(config, master.state_dim(), master.action_dim())),
        seeds_(eval_seeds(config.seed, config.eval_episodes)) {}

  RunResult run() {
    const auto start = Clock::now();
    RunResult result;
    if (config_.total_timesteps == 0) return result;
    evaluate_at(0);

    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < config_.actors; ++i) threads.emplace_back([this, i] { guarded([&] { actor(i); }); });
    for (std::size_t j = 0; j < config_.learners; ++j)
      threads.emplace_back([this, j] { guarded([&] { learner(j); }); });
    for (std::size_t i = 0; i < config_.actors; ++i) threads[i].join();
    {
      std::lock_guard lock(mu_);
      actors_done_ = true;
    }
    cv_.notify_all();
    for (std::size_t j = config_.actors; j < threads.size(); ++j) threads[j].join();
    if (error_) std::rethrow_exception(error_);

    std::sort(evals_.begin(), evals_.end(),
              [](const EvalRecord& a, const EvalRecord& b) { return a.timestep < b.timestep; });
    result.evals = std::move(evals_);
    result.env_steps = completed_;
    result.episodes = episodes_;
    result.transitions_pushed = buffer_->pushed();
    result.critic_updates = master_.critic_updates();
    result.actor_updates = master_.actor_updates();
    result.snapshot_version = memory_.version();
    result.snapshot_reads = reads_.load();
    result.torn_snapshots = torn_.load();
    result.stale_priority_updates = buffer_->stale_updates();
    result.wall_seconds = seconds_since(start);
    return result;
  }

 private:
  template <typename F>
  void guarded(F&& body) {
    try {
      body();
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
      abort_ = true;
      cv_.notify_all();
    }
  }

  std::shared_ptr<const Snapshot> read_snapshot() {
    auto snap = memory_.read();
    ++reads_;
    if (!snap->intact()) ++torn_;
    return snap;
  }

  void evaluate_at(std::uint64_t t) {
    auto snap = read_snapshot();
    auto env = make_env_();
    EvalRecord rec{t, snap->version, evaluate(snap->agent->actor(), *env, seeds_, config_.eval_top_k)};
    std::lock_guard lock(observer_mu_);
    if (observer_) {
      observer_->on_eval(rec);
      observer_->on_checkpoint(t, *snap->agent);
    }
    evals_.push_back(std::move(rec));
  }

  std::uint64_t allowed_updates() const {
    return completed_ > config_.start_timesteps ? completed_ - config_.start_timesteps : 0;
  }

  void actor(std::size_t id) {
    auto env = make_env_();
    const BoxSpec box = env->action_spec();
    Rng rng = make_rng(config_.seed, "actor/" + std::to_string(id));
    auto snap = read_snapshot();
    agent::Explorer explorer(snap->agent->exploration(), snap->agent->action_dim());
    std::uint64_t local_episode = 0;
    std::vector<double> obs = env->reset(episode_seed(config_.seed, id, local_episode));
    EpisodeSummary summary;
    std::size_t since_refresh = 0;

    for (;;) {
      const std::uint64_t t = claimed_.fetch_add(1);
      if (t >= config_.total_timesteps || abort_) break;
      if (config_.lockstep || since_refresh >= config_.snapshot_refresh) {
        snap = read_snapshot();
        since_refresh = 0;
      }
      std::vector<double> unit = t < config_.start_timesteps
                                     ? agent::uniform_action(snap->agent->action_dim(), rng)
                                     : explorer.perturb(snap->agent->act(obs), rng);
      StepOutcome out = env->step(box.from_unit(unit));
      buffer_->push(make_transition(obs, std::move(unit), out));
      ++since_refresh;
      summary.add(out);
      obs = out.observation;

      std::uint64_t done_count = 0;
      {
        std::unique_lock lock(mu_);
        done_count = ++completed_;
        if (out.done) {
          summary.finish();
          const EpisodeRecord rec{done_count, episodes_++, id, summary};
          std::lock_guard olock(observer_mu_);
          if (observer_) observer_->on_episode(rec);
        }
        if (config_.lockstep && t >= config_.start_timesteps) {
          learner_turn_ = true;
          cv_.notify_all();
          cv_.wait(lock, [&] { return !learner_turn_ || abort_; });
        } else {
          cv_.notify_all();
        }
      }
      if (out.done) {
        summary = EpisodeSummary{};
        ++local_episode;
        obs = env->reset(episode_seed(config_.seed, id, local_episode));
        explorer.reset();
      }
      if (done_count % config_.eval_interval == 0) evaluate_at(done_count);
    }
  }

  void learner(std::size_t id) {
    Rng rng = make_rng(config_.seed, "learner/" + std::to_string(id));
    for (;;) {
      {
        std::unique_lock lock(mu_);
        if (config_.lockstep) {
          cv_.wait(lock, [&] { return learner_turn_ || actors_done_ || abort_; });
          if (!learner_turn_) return;
        } else {
          cv_.wait(lock, [&] { return tickets_ < allowed_updates() || actors_done_ || abort_; });
          if (abort_ || tickets_ >= allowed_updates()) return;
          ++tickets_;
        }
      }
      if (!update_once(rng)) {
        std::unique_lock lock(mu_);
        if (config_.lockstep) {
          learner_turn_ = false;
          cv_.notify_all();
          continue;
        }
        --tickets_;
        if (actors_done_) return;
        const std::uint64_t seen = completed_;
        cv_.wait(lock, [&] { return completed_ > seen || actors_done_ || abort_; });
        continue;
      }
      if (config_.lockstep) {
        std::lock_guard lock(mu_);
        learner_turn_ = false;
        cv_.notify_all();
      }
    }
  }

  /// Returns false when no shard holds a full batch yet.
  bool update_once(Rng& rng) {
    auto snap = read_snapshot();
    const agent::ActorCriticAgent& local = *snap->agent;
    replay::Batch batch;
    {
      std::uint64_t t;
      {
        std::lock_guard lock(mu_);
        t = completed_ == 0 ? 0 : completed_ - 1;
      }
      buffer_->set_beta(replay::annealed_beta(config_.priority_beta0, t, config_.total_timesteps));
      try {
        batch = buffer_->sample(local.batch_size(), rng);
      } catch (const InsufficientData&) {
        return false;
      }
    }
    const agent::CriticStep step = local.compute_critic_step(std::move(batch), rng);
    {
      std::lock_guard lock(apply_mu_);
      const agent::Diagnostics diag = master_.apply_update(step);
      memory_.publish(std::shared_ptr<const agent::ActorCriticAgent>(master_.clone()));
      std::lock_guard olock(observer_mu_);
      if (observer_) observer_->on_update({master_.critic_updates(), diag});
    }
    buffer_->update_priorities(step.batch.indices, step.priorities);
    return true;
  }

  const RunConfig& config_;
  agent::ActorCriticAgent& master_;
  const EnvFactory& make_env_;
  Observer* observer_;
  SharedMemory memory_;
  std::unique_ptr<replay::ReplayBuffer> buffer_;
  std::vector<std::uint64_t> seeds_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t completed_ = 0;
  std::uint64_t tickets_ = 0;
  std::uint64_t episodes_ = 0;
  bool learner_turn_ = false;
  bool actors_done_ = false;
  std::atomic<bool> abort_{false};
  std::exception_ptr error_;

  std::atomic<std::uint64_t> claimed_{0};
  std::atomic<std::uint64_t> reads_{0};
  std::atomic<std::uint64_t> torn_{0};

  std::mutex apply_mu_;
  std::mutex observer_mu_;
  std::vector<EvalRecord> evals_;
};

}  // namespace

RunResult run_async(const RunConfig& config, agent::ActorCriticAgent& agent, const EnvFactory& make_env,
                    Observer* observer) {
  config.validate();
  AsyncRun run(config, agent, make_env, observer);
  return run.run();
}

RunResult run(const RunConfig& config, agent::ActorCriticAgent& agent, const EnvFactory& make_env,
              Observer* observer) {
  return config.mode == Mode::kSync ? run_sync(config, agent, make_env, observer)
                                    : run_async(config, agent, make_env, observer);
}

}  // namespace slicebench::runtime
