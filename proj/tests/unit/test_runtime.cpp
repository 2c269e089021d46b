#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include "slicebench/agent.hpp"
#include "slicebench/errors.hpp"
#include "slicebench/runtime.hpp"
#include "slicebench/toy_env.hpp"

using namespace slicebench;
using namespace slicebench::runtime;

namespace {

std::unique_ptr<agent::DTd3Agent> tiny_agent(std::uint64_t seed) {
  agent::DTd3Config cfg;
  cfg.hidden = {8, 8};
  cfg.batch_size = 8;
  Rng rng = make_rng(seed, "agent/init");
  return std::make_unique<agent::DTd3Agent>(2, 1, cfg, rng);
}

EnvFactory toy() {
  return [] { return std::make_unique<ToyMdp>(ToyMdpParams{{0.0, 1.0}, {0.5, -0.5}, 0.4, 20}); };
}

RunConfig small_run() {
  RunConfig c;
  c.total_timesteps = 300;
  c.start_timesteps = 50;
  c.eval_interval = 100;
  c.eval_episodes = 3;
  c.eval_top_k = 2;
  c.replay_capacity = 1000;
  c.seed = 5;
  return c;
}

struct Counter : Observer {
  std::atomic<int> episodes{0}, evals{0}, updates{0}, checkpoints{0};
  std::vector<std::uint64_t> eval_steps;
  std::uint64_t last_update = 0;
  bool updates_ordered = true;
  void on_episode(const EpisodeRecord&) override { ++episodes; }
  void on_eval(const EvalRecord& r) override {
    ++evals;
    eval_steps.push_back(r.timestep);
  }
  void on_update(const UpdateRecord& r) override {
    ++updates;
    if (r.index != last_update + 1) updates_ordered = false;
    last_update = r.index;
  }
  void on_checkpoint(std::uint64_t, const agent::ActorCriticAgent&) override { ++checkpoints; }
};

}  // namespace

TEST_CASE("top-k mean") {
  CHECK(top_k_mean({1.0, 5.0, 3.0, 4.0}, 2) == doctest::Approx(4.5));
  CHECK(top_k_mean({1.0, 2.0}, 5) == doctest::Approx(1.5));
  CHECK(top_k_mean({-3.0, -1.0, -2.0}, 1) == doctest::Approx(-1.0));
}

TEST_CASE("evaluation seeds are fixed per run and distinct") {
  const auto a = eval_seeds(7, 5);
  const auto b = eval_seeds(7, 5);
  CHECK(a == b);
  CHECK(std::set<std::uint64_t>(a.begin(), a.end()).size() == 5);
  CHECK(eval_seeds(8, 5) != a);
}

TEST_CASE("evaluate scores the top returns of noiseless episodes") {
  auto ag = tiny_agent(1);
  ToyMdp env({{0.0, 1.0}, {0.5, -0.5}, 0.4, 10});
  const auto seeds = eval_seeds(3, 4);
  const EvalResult r = evaluate(ag->actor(), env, seeds, 2);
  REQUIRE(r.returns.size() == 4);
  CHECK(r.score == doctest::Approx(top_k_mean(r.returns, 2)));
  const EvalResult again = evaluate(ag->actor(), env, seeds, 2);
  CHECK(again.returns == r.returns);
  for (const auto& e : r.episodes) CHECK(e.steps == 10);
}

TEST_CASE("sync run cadence and accounting") {
  auto ag = tiny_agent(1);
  Counter obs;
  const RunResult r = run_sync(small_run(), *ag, toy(), &obs);
  CHECK(r.env_steps == 300);
  CHECK(r.transitions_pushed == 300);
  CHECK(r.episodes == 15);
  CHECK(r.critic_updates == 250);
  CHECK(r.actor_updates == 125);
  REQUIRE(r.evals.size() == 4);
  CHECK(obs.eval_steps == std::vector<std::uint64_t>{0, 100, 200, 300});
  CHECK(r.evals[0].version == 0);
  CHECK(r.evals[1].version == 50);
  CHECK(obs.episodes == 15);
  CHECK(obs.updates == 250);
  CHECK(obs.checkpoints == 4);
  CHECK(obs.updates_ordered);
}

TEST_CASE("updates wait for a full batch") {
  auto ag = tiny_agent(1);
  RunConfig c = small_run();
  c.start_timesteps = 0;
  c.total_timesteps = 100;
  const RunResult r = run_sync(c, *ag, toy());
  CHECK(r.critic_updates == 100 - 7);
}

TEST_CASE("sync runs are reproducible from the seed") {
  auto a = tiny_agent(1), b = tiny_agent(1), c = tiny_agent(1);
  RunConfig cfg = small_run();
  const RunResult ra = run_sync(cfg, *a, toy());
  const RunResult rb = run_sync(cfg, *b, toy());
  cfg.seed = 6;
  run_sync(cfg, *c, toy());
  CHECK(a->checksum() == b->checksum());
  CHECK(a->checksum() != c->checksum());
  for (std::size_t i = 0; i < ra.evals.size(); ++i) CHECK(ra.evals[i].result.returns == rb.evals[i].result.returns);
}

TEST_CASE("zero timesteps does nothing") {
  auto ag = tiny_agent(1);
  const auto before = ag->checksum();
  RunConfig c = small_run();
  c.total_timesteps = 0;
  Counter obs;
  const RunResult r = run(c, *ag, toy(), &obs);
  CHECK(r.evals.empty());
  CHECK(r.env_steps == 0);
  CHECK(obs.evals == 0);
  CHECK(ag->checksum() == before);
  c.mode = Mode::kAsync;
  CHECK(run(c, *ag, toy()).env_steps == 0);
}

TEST_CASE("run configuration validation") {
  RunConfig c = small_run();
  c.eval_interval = 301;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_run();
  c.eval_top_k = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_run();
  c.lockstep = true;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.actors = c.buffers = c.learners = 1;
  CHECK_NOTHROW(c.validate());
  c = small_run();
  c.priority_beta0 = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("replay factory honours mode and kind") {
  RunConfig c = small_run();
  c.replay = ReplayKind::kUniform;
  CHECK(dynamic_cast<replay::UniformBuffer*>(make_replay(c, 2, 1).get()) != nullptr);
  c.replay = ReplayKind::kPrioritized;
  CHECK(dynamic_cast<replay::PrioritizedBuffer*>(make_replay(c, 2, 1).get()) != nullptr);
  c.mode = Mode::kAsync;
  auto sharded = make_replay(c, 2, 1);
  auto* s = dynamic_cast<replay::ShardedReplay*>(sharded.get());
  REQUIRE(s != nullptr);
  CHECK(s->shard_count() == 2);
  CHECK(s->capacity() == 1000);
}

TEST_CASE("shared memory hands out intact snapshots under contention") {
  auto ag = tiny_agent(1);
  SharedMemory mem(std::shared_ptr<const agent::ActorCriticAgent>(ag->clone()));
  std::atomic<bool> stop{false};
  std::atomic<int> torn{0}, regress{0};
  std::vector<std::thread> readers;
  for (int i = 0; i < 3; ++i)
    readers.emplace_back([&] {
      std::uint64_t last = 0;
      while (!stop) {
        const auto snap = mem.read();
        if (!snap->intact()) ++torn;
        if (snap->version < last) ++regress;
        last = snap->version;
      }
    });
  replay::UniformBuffer buf(100, 2, 1);
  Rng data(1);
  for (int i = 0; i < 50; ++i) buf.push({{1.0, 0.0}, {0.1}, 0.5, {0.0, 1.0}, false});
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    ag->train_step(buf, rng);
    CHECK(mem.publish(std::shared_ptr<const agent::ActorCriticAgent>(ag->clone())) == static_cast<std::uint64_t>(i + 1));
  }
  stop = true;
  for (auto& t : readers) t.join();
  CHECK(torn == 0);
  CHECK(regress == 0);
  CHECK(mem.version() == 200);
  CHECK(mem.read()->agent->checksum() == ag->checksum());
}

TEST_CASE("async run accounts for every step and update") {
  auto ag = tiny_agent(2);
  RunConfig c = small_run();
  c.mode = Mode::kAsync;
  c.total_timesteps = 2000;
  c.eval_interval = 500;
  c.actors = 3;
  c.buffers = 2;
  c.learners = 3;
  Counter obs;
  const RunResult r = run(c, *ag, toy(), &obs);
  CHECK(r.env_steps == 2000);
  CHECK(r.transitions_pushed == 2000);
  CHECK(r.torn_snapshots == 0);
  CHECK(r.critic_updates <= 2000 - 50);
  CHECK(r.critic_updates > 0);
  CHECK(r.snapshot_version == r.critic_updates);
  CHECK(r.evals.size() == 5);
  CHECK(obs.updates_ordered);
  CHECK(obs.episodes == static_cast<int>(r.episodes));
  CHECK(ag->critic_updates() == r.critic_updates);
}

TEST_CASE("async run with a tiny replay capacity still finishes") {
  auto ag = tiny_agent(3);
  RunConfig c = small_run();
  c.mode = Mode::kAsync;
  c.replay_capacity = 16;
  c.total_timesteps = 400;
  c.start_timesteps = 0;
  const RunResult r = run(c, *ag, toy());
  CHECK(r.env_steps == 400);
  CHECK(r.torn_snapshots == 0);
}

TEST_CASE("lockstep async runs are reproducible") {
  RunConfig c = small_run();
  c.mode = Mode::kAsync;
  c.lockstep = true;
  c.actors = c.buffers = c.learners = 1;
  auto a = tiny_agent(4), b = tiny_agent(4);
  const RunResult ra = run(c, *a, toy());
  const RunResult rb = run(c, *b, toy());
  CHECK(ra.critic_updates == 250);
  CHECK(a->checksum() == b->checksum());
}

TEST_CASE("lockstep async reproduces the sync run") {
  RunConfig c = small_run();
  auto s = tiny_agent(6), a = tiny_agent(6);
  run(c, *s, toy());
  c.mode = Mode::kAsync;
  c.lockstep = true;
  c.actors = c.buffers = c.learners = 1;
  run(c, *a, toy());
  CHECK(a->critic_updates() == s->critic_updates());
  CHECK(a->checksum() == s->checksum());
}
