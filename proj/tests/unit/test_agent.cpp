#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "slicebench/agent.hpp"
#include "slicebench/errors.hpp"

using namespace slicebench;
using namespace slicebench::agent;

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

DTd3Config small_config() {
  DTd3Config c;
  c.hidden = {16, 16};
  c.batch_size = 8;
  return c;
}

replay::Batch random_batch(std::size_t sdim, std::size_t adim, std::size_t n, Rng& rng, double reward_mag = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  replay::Batch b;
  const auto N = static_cast<Eigen::Index>(n);
  b.states = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(sdim), N, [&] { return u(rng); });
  b.next_states = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(sdim), N, [&] { return u(rng); });
  b.actions = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(adim), N, [&] { return u(rng); });
  b.rewards = Eigen::VectorXd::NullaryExpr(N, [&] { return reward_mag * u(rng); });
  b.terminals = Eigen::VectorXd::Zero(N);
  b.weights = Eigen::VectorXd::Ones(N);
  b.indices.resize(n);
  return b;
}

void fill_buffer(replay::ReplayBuffer& buf, std::size_t sdim, std::size_t adim, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    replay::Transition t;
    t.state.resize(sdim);
    t.next_state.resize(sdim);
    t.action.resize(adim);
    for (auto& x : t.state) x = u(rng);
    for (auto& x : t.next_state) x = u(rng);
    for (auto& x : t.action) x = u(rng);
    t.reward = u(rng);
    buf.push(t);
  }
}

}  // namespace

TEST_CASE("gaussian negative log-likelihood values") {
  CHECK(gaussian_nll(0.0, 0.0, 1.0) == doctest::Approx(kHalfLog2Pi));
  CHECK(gaussian_nll(3.0, 1.0, 2.0) == doctest::Approx(kHalfLog2Pi + std::log(2.0) + 0.5));
  CHECK(gaussian_nll(-1.0, 1.0, 0.5) == doctest::Approx(kHalfLog2Pi + std::log(0.5) + 8.0));
}

TEST_CASE("log-std squashing is bounded and differentiable") {
  CHECK(squash_log_std(0.0) == 0.0);
  CHECK(std::exp(squash_log_std(1e6)) == doctest::Approx(1e3));
  CHECK(std::exp(squash_log_std(-1e6)) == doctest::Approx(1e-3));
  CHECK(squash_log_std(0.3) == doctest::Approx(0.3).epsilon(1e-2));
  for (double x : {-9.0, -1.0, 0.0, 0.5, 4.0}) {
    const double h = 1e-6;
    const double fd = (squash_log_std(x + h) - squash_log_std(x - h)) / (2 * h);
    CHECK(squash_log_std_derivative(x) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("bellman targets are clipped around the current mean") {
  Eigen::VectorXd r(4), d(4), z(4), q(4);
  r << 1.0, 1.0, 0.0, 50.0;
  d << 0.0, 1.0, 0.0, 0.0;
  z << 2.0, 2.0, -100.0, 0.0;
  q << 0.0, 0.0, 0.0, 0.0;
  const auto y = DTd3Agent::bellman_targets(r, d, z, q, 0.5, 18.0);
  CHECK(y(0) == doctest::Approx(2.0));
  CHECK(y(1) == doctest::Approx(1.0));
  CHECK(y(2) == doctest::Approx(-18.0));
  CHECK(y(3) == doctest::Approx(18.0));
}

TEST_CASE("critic gradients match finite differences of the loss") {
  Rng init(11);
  DTd3Config cfg = small_config();
  cfg.hidden = {6, 5};
  cfg.activation = nn::Activation::kTanh;
  DTd3Agent agent(3, 2, cfg, init);
  Rng data(12);
  const replay::Batch batch = random_batch(3, 2, 5, data);

  auto loss_with_seed = [&](const DTd3Agent& a) {
    Rng r(99);
    return a.compute_critic_step(batch, r).diag.critic_loss;
  };
  Rng r(99);
  const CriticStep step = agent.compute_critic_step(batch, r);
  REQUIRE(step.critic_grads.size() == 1);
  REQUIRE(step.diag.targets_clipped == 0);

  auto& critic = const_cast<nn::Mlp&>(*agent.critics()[0]);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < critic.depth(); ++l) {
    auto& W = critic.layers()[l].weight;
    for (Eigen::Index i = 0; i < W.size(); ++i) {
      const double keep = W.data()[i];
      W.data()[i] = keep + h;
      const double up = loss_with_seed(agent);
      W.data()[i] = keep - h;
      const double down = loss_with_seed(agent);
      W.data()[i] = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - step.critic_grads[0][l].weight.data()[i]) / std::max(1.0, std::abs(fd)));
    }
    auto& b = critic.layers()[l].bias;
    for (Eigen::Index i = 0; i < b.size(); ++i) {
      const double keep = b(i);
      b(i) = keep + h;
      const double up = loss_with_seed(agent);
      b(i) = keep - h;
      const double down = loss_with_seed(agent);
      b(i) = keep;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - step.critic_grads[0][l].bias(i)) / std::max(1.0, std::abs(fd)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("priorities follow the selected transform") {
  Rng init(3);
  DTd3Config cfg = small_config();
  DTd3Agent nll_agent(3, 2, cfg, init);
  cfg.priority_transform = PriorityTransform::kNllExcess;
  Rng init2(3);
  DTd3Agent excess_agent(3, 2, cfg, init2);
  Rng data(4);
  const replay::Batch batch = random_batch(3, 2, 6, data);
  Rng r1(5), r2(5);
  const auto a = nll_agent.compute_critic_step(batch, r1);
  const auto b = excess_agent.compute_critic_step(batch, r2);
  const GaussianReturn g = nll_agent.evaluate(batch.states, batch.actions);
  double mean_loss = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    CHECK(a.priorities[i] - b.priorities[i] == doctest::Approx(kHalfLog2Pi + g.log_std(ii)));
    CHECK(b.priorities[i] >= 0.0);
    mean_loss += a.priorities[i] / 6.0;
  }
  CHECK(a.diag.critic_loss == doctest::Approx(mean_loss));
}

TEST_CASE("clip boundary bounds every target gap") {
  Rng init(1);
  DTd3Config cfg = small_config();
  cfg.clip_boundary = 0.25;
  DTd3Agent agent(3, 2, cfg, init);
  Rng data(2);
  replay::Batch batch = random_batch(3, 2, 32, data, 0.0);
  batch.rewards.setConstant(1000.0);
  Rng r(3);
  const auto step = agent.compute_critic_step(batch, r);
  CHECK(step.diag.targets_clipped == 32);
  CHECK(step.diag.target_gap_max == doctest::Approx(0.25));
}

TEST_CASE("target-policy smoothing noise stays inside the clip") {
  Rng init(1);
  DTd3Config cfg = small_config();
  cfg.smoothing_noise = 5.0;
  cfg.smoothing_clip = 0.3;
  DTd3Agent agent(3, 2, cfg, init);
  Rng data(2);
  const replay::Batch batch = random_batch(3, 2, 64, data);
  Rng r(3);
  const auto step = agent.compute_critic_step(batch, r);
  CHECK(step.diag.smoothing_noise_max == doctest::Approx(0.3));
}

TEST_CASE("gaussian exploration has the configured spread") {
  Explorer ex({NoiseKind::kGaussian, 0.1, 0.15}, 1);
  Rng rng(8);
  const double zero[] = {0.0};
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = ex.perturb(zero, rng)[0];
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  CHECK(std::abs(mean) < 1e-3);
  CHECK(std::sqrt(s2 / n - mean * mean) == doctest::Approx(0.1).epsilon(0.01));
  const double edge[] = {1.0};
  for (int i = 0; i < 100; ++i) CHECK(ex.perturb(edge, rng)[0] <= 1.0);
}

TEST_CASE("ornstein-uhlenbeck noise reaches its stationary spread and resets") {
  const double sigma = 0.05, theta = 0.15;
  Explorer ex({NoiseKind::kOrnsteinUhlenbeck, sigma, theta}, 1);
  Rng rng(9);
  const double zero[] = {0.0};
  for (int i = 0; i < 1000; ++i) ex.perturb(zero, rng);
  double s2 = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) {
    const double v = ex.perturb(zero, rng)[0];
    s2 += v * v;
  }
  const double stationary = sigma * sigma / (1.0 - (1.0 - theta) * (1.0 - theta));
  CHECK(s2 / n == doctest::Approx(stationary).epsilon(0.05));
  ex.reset();
  Rng quiet(1);
  Explorer still({NoiseKind::kOrnsteinUhlenbeck, 0.0, theta}, 1);
  CHECK(still.perturb(zero, quiet)[0] == 0.0);
}

TEST_CASE("policy output is clipped to the action cube") {
  Rng init(2);
  DTd3Agent agent(3, 2, small_config(), init);
  const double obs[] = {100.0, -50.0, 3.0};
  for (double a : agent.act(obs)) {
    CHECK(a >= kActionLow);
    CHECK(a <= kActionHigh);
  }
  Rng rng(1);
  for (double a : uniform_action(4, rng)) CHECK(std::abs(a) <= 1.0);
}

TEST_CASE("update counters respect the policy frequency") {
  Rng init(4);
  DTd3Config cfg = small_config();
  cfg.policy_freq = 3;
  DTd3Agent agent(3, 2, cfg, init);
  replay::UniformBuffer buf(100, 3, 2);
  Rng data(5);
  fill_buffer(buf, 3, 2, 50, data);
  Rng rng(6);
  std::size_t actor_steps = 0;
  for (int i = 0; i < 10; ++i) actor_steps += agent.train_step(buf, rng).actor_updated;
  CHECK(agent.critic_updates() == 10);
  CHECK(agent.actor_updates() == 3);
  CHECK(agent.soft_updates() == 3);
  CHECK(actor_steps == 3);
}

TEST_CASE("soft target update has the closed form") {
  Rng init(4);
  DTd3Config cfg = small_config();
  cfg.policy_freq = 1;
  cfg.tau = 0.25;
  DTd3Agent agent(3, 2, cfg, init);
  replay::UniformBuffer buf(100, 3, 2);
  Rng data(5);
  fill_buffer(buf, 3, 2, 50, data);
  Rng rng(6);
  agent.train_step(buf, rng);
  const auto before_target = agent.target_actor().flatten();
  const auto before_critic = agent.target_critics()[0]->flatten();
  agent.train_step(buf, rng);
  const auto online = agent.actor().flatten();
  const auto target = agent.target_actor().flatten();
  for (std::size_t i = 0; i < online.size(); ++i)
    CHECK(target[i] == doctest::Approx(0.25 * online[i] + 0.75 * before_target[i]).epsilon(1e-12));
  const auto critic = agent.critics()[0]->flatten();
  const auto tcritic = agent.target_critics()[0]->flatten();
  for (std::size_t i = 0; i < critic.size(); ++i)
    CHECK(tcritic[i] == doctest::Approx(0.25 * critic[i] + 0.75 * before_critic[i]).epsilon(1e-12));
}

TEST_CASE("non-finite updates are skipped without touching parameters") {
  Rng init(4);
  DTd3Agent agent(3, 2, small_config(), init);
  Rng data(5);
  replay::Batch batch = random_batch(3, 2, 8, data);
  batch.rewards(0) = std::numeric_limits<double>::quiet_NaN();
  const auto before = agent.checksum();
  Rng r(1);
  const auto step = agent.compute_critic_step(batch, r);
  CHECK_FALSE(step.diag.finite);
  agent.apply_update(step);
  CHECK(agent.skipped_updates() == 1);
  CHECK(agent.critic_updates() == 0);
  CHECK(agent.checksum() == before);
}

TEST_CASE("actor climbs a learned quadratic critic") {
  Rng init(21);
  DTd3Config cfg;
  cfg.hidden = {32, 32};
  cfg.batch_size = 64;
  cfg.reward_scale = 1.0;
  cfg.tau = 0.05;
  DTd3Agent agent(1, 1, cfg, init);
  replay::UniformBuffer buf(4000, 1, 1);
  Rng data(22);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 4000; ++i) {
    const double a = u(data);
    buf.push({{0.0}, {a}, -std::pow(a - 0.3, 2.0), {0.0}, true});
  }
  Rng rng(23);
  for (int i = 0; i < 4000; ++i) agent.train_step(buf, rng);
  const double obs[] = {0.0};
  CHECK(agent.act(obs)[0] == doctest::Approx(0.3).epsilon(0.1));
  const GaussianReturn g = agent.evaluate(Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Constant(1, 1, 0.3));
  CHECK(std::abs(g.mean(0)) < 0.05);
}

TEST_CASE("checkpoint round trip restores the agent exactly") {
  Rng init(4);
  DTd3Agent agent(3, 2, small_config(), init);
  replay::UniformBuffer buf(100, 3, 2);
  Rng data(5);
  fill_buffer(buf, 3, 2, 50, data);
  Rng rng(6);
  for (int i = 0; i < 5; ++i) agent.train_step(buf, rng);
  std::stringstream ss;
  agent.save(ss);

  Rng other(77);
  DTd3Agent restored(3, 2, small_config(), other);
  CHECK(restored.checksum() != agent.checksum());
  restored.load(ss);
  CHECK(restored.checksum() == agent.checksum());
  CHECK(restored.critic_updates() == 5);

  Rng r1(9), r2(9);
  restored.train_step(buf, r1);
  agent.train_step(buf, r2);
  CHECK(restored.checksum() == agent.checksum());

  std::stringstream again;
  agent.save(again);
  DTd3Config wide = small_config();
  wide.hidden = {8};
  Rng r3(1);
  DTd3Agent mismatched(3, 2, wide, r3);
  CHECK_THROWS_AS(mismatched.load(again), CheckpointError);
  std::stringstream junk("not a checkpoint");
  CHECK_THROWS_AS(restored.load(junk), CheckpointError);
}

TEST_CASE("invalid configuration is rejected") {
  Rng rng(1);
  DTd3Config cfg = small_config();
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(DTd3Agent(3, 2, cfg, rng), ConfigError);
  cfg = small_config();
  cfg.clip_boundary = 0.0;
  CHECK_THROWS_AS(DTd3Agent(3, 2, cfg, rng), ConfigError);
  cfg = small_config();
  cfg.target_samples = 0;
  CHECK_THROWS_AS(DTd3Agent(3, 2, cfg, rng), ConfigError);
  cfg = small_config();
  cfg.initial_sigma = 0.0;
  CHECK_THROWS_AS(DTd3Agent(3, 2, cfg, rng), ConfigError);
}

TEST_CASE("log-std head starts at the configured sigma") {
  CHECK(squash_log_std(unsquash_log_std(std::log(0.002))) == doctest::Approx(std::log(0.002)).epsilon(1e-12));
  for (double s0 : {0.002, 0.5}) {
    Rng rng(17);
    DTd3Config cfg = small_config();
    cfg.initial_sigma = s0;
    DTd3Agent agent(3, 2, cfg, rng);
    const auto& head = agent.critics()[0]->layers().back();
    CHECK(squash_log_std(head.bias(1)) == doctest::Approx(std::log(s0)).epsilon(1e-12));
  }
}

TEST_CASE("actor gradient matches finite differences of the policy objective") {
  Rng init(31);
  DTd3Config cfg = small_config();
  cfg.hidden = {5, 4};
  cfg.activation = nn::Activation::kTanh;
  DTd3Agent agent(3, 2, cfg, init);
  Rng data(32);
  const Eigen::MatrixXd states = random_batch(3, 2, 6, data).states;
  const nn::Gradients g = agent.actor_gradient(states);
  auto objective = [&] {
    const Eigen::MatrixXd a = agent.actor().forward(states);
    return -agent.evaluate(states, a).mean.mean();
  };
  auto& actor = const_cast<nn::Mlp&>(agent.actor());
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < actor.depth(); ++l) {
    auto& W = actor.layers()[l].weight;
    for (Eigen::Index i = 0; i < W.size(); ++i) {
      const double keep = W.data()[i];
      W.data()[i] = keep + h;
      const double up = objective();
      W.data()[i] = keep - h;
      const double down = objective();
      W.data()[i] = keep;
      worst = std::max(worst, std::abs((up - down) / (2 * h) - g[l].weight.data()[i]));
    }
  }
  CHECK(worst < 1e-7);
}
