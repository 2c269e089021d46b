#include <doctest.h>

#include <cmath>
#include <sstream>

#include "slicebench/baselines.hpp"
#include "slicebench/errors.hpp"

using namespace slicebench;
using namespace slicebench::agent;

namespace {

replay::Batch random_batch(std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto N = static_cast<Eigen::Index>(n);
  replay::Batch b;
  b.states = Eigen::MatrixXd::NullaryExpr(3, N, [&] { return u(rng); });
  b.next_states = Eigen::MatrixXd::NullaryExpr(3, N, [&] { return u(rng); });
  b.actions = Eigen::MatrixXd::NullaryExpr(2, N, [&] { return u(rng); });
  b.rewards = Eigen::VectorXd::NullaryExpr(N, [&] { return u(rng); });
  b.terminals = Eigen::VectorXd::Zero(N);
  b.weights = Eigen::VectorXd::Ones(N);
  b.indices.resize(n);
  return b;
}

void fill(replay::ReplayBuffer& buf, std::size_t n, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    buf.push({{u(rng), u(rng), u(rng)}, {u(rng), u(rng)}, u(rng), {u(rng), u(rng), u(rng)}, false});
}

template <typename Agent>
double max_fd_error(Agent& agent, const replay::Batch& batch, std::size_t critic_index) {
  auto loss = [&] {
    Rng r(42);
    return agent.compute_critic_step(batch, r).diag.critic_loss;
  };
  Rng r(42);
  const CriticStep step = agent.compute_critic_step(batch, r);
  auto& net = const_cast<nn::Mlp&>(*agent.critics()[critic_index]);
  const auto& grads = step.critic_grads[critic_index];
  const double scale = agent.critics().size() == 2 ? 0.5 : 1.0;
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.depth(); ++l) {
    auto& W = net.layers()[l].weight;
    for (Eigen::Index i = 0; i < W.size(); i += 3) {
      const double keep = W.data()[i];
      W.data()[i] = keep + h;
      const double up = loss();
      W.data()[i] = keep - h;
      const double down = loss();
      W.data()[i] = keep;
      const double fd = (up - down) / (2 * h) / scale;
      worst = std::max(worst, std::abs(fd - grads[l].weight.data()[i]) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("td3 targets take the smaller twin estimate") {
  Eigen::VectorXd r(3), d(3), q1(3), q2(3);
  r << 1.0, -1.0, 0.5;
  d << 0.0, 0.0, 1.0;
  q1 << 2.0, 5.0, 9.0;
  q2 << 3.0, 4.0, 9.0;
  const auto y = Td3Agent::targets(r, d, q1, q2, 0.9);
  CHECK(y(0) == doctest::Approx(1.0 + 0.9 * 2.0));
  CHECK(y(1) == doctest::Approx(-1.0 + 0.9 * 4.0));
  CHECK(y(2) == doctest::Approx(0.5));
}

TEST_CASE("ddpg targets bootstrap from the single target critic") {
  Eigen::VectorXd r(2), d(2), q(2);
  r << 1.0, 2.0;
  d << 0.0, 1.0;
  q << 10.0, 10.0;
  const auto y = DdpgAgent::targets(r, d, q, 0.5);
  CHECK(y(0) == doctest::Approx(6.0));
  CHECK(y(1) == doctest::Approx(2.0));
}

TEST_CASE("td3 critic gradients match finite differences") {
  Td3Config cfg;
  cfg.hidden = {6, 5};
  cfg.activation = nn::Activation::kTanh;
  Rng init(1);
  Td3Agent agent(3, 2, cfg, init);
  Rng data(2);
  const auto batch = random_batch(6, data);
  CHECK(max_fd_error(agent, batch, 0) < 1e-6);
  CHECK(max_fd_error(agent, batch, 1) < 1e-6);
}

TEST_CASE("ddpg critic gradients match finite differences") {
  DdpgConfig cfg;
  cfg.hidden = {6, 5};
  cfg.activation = nn::Activation::kTanh;
  Rng init(3);
  DdpgAgent agent(3, 2, cfg, init);
  Rng data(4);
  const auto batch = random_batch(6, data);
  CHECK(max_fd_error(agent, batch, 0) < 1e-6);
}

TEST_CASE("baseline priorities are absolute errors of the online critic") {
  DdpgConfig cfg;
  cfg.hidden = {8};
  Rng init(5);
  DdpgAgent agent(3, 2, cfg, init);
  Rng data(6);
  const auto batch = random_batch(10, data);
  Rng r(1);
  const auto step = agent.compute_critic_step(batch, r);
  double mse = 0.0;
  for (double p : step.priorities) {
    CHECK(p >= 0.0);
    mse += p * p / 10.0;
  }
  CHECK(step.diag.critic_loss == doctest::Approx(mse));
}

TEST_CASE("update schedules") {
  Rng data(7);
  replay::UniformBuffer buf(200, 3, 2);
  fill(buf, 120, data);

  Td3Config tcfg;
  tcfg.hidden = {8, 8};
  tcfg.batch_size = 16;
  Rng i1(1);
  Td3Agent td3(3, 2, tcfg, i1);
  DdpgConfig dcfg;
  dcfg.hidden = {8, 8};
  dcfg.batch_size = 16;
  Rng i2(1);
  DdpgAgent ddpg(3, 2, dcfg, i2);
  Rng rng(8);
  for (int i = 0; i < 9; ++i) {
    td3.train_step(buf, rng);
    ddpg.train_step(buf, rng);
  }
  CHECK(td3.critic_updates() == 9);
  CHECK(td3.actor_updates() == 4);
  CHECK(ddpg.critic_updates() == 9);
  CHECK(ddpg.actor_updates() == 9);
  CHECK(td3.critics().size() == 2);
  CHECK(ddpg.critics().size() == 1);
}

TEST_CASE("ddpg exploration follows its noise setting") {
  DdpgConfig cfg;
  cfg.hidden = {4};
  cfg.noise = NoiseKind::kOrnsteinUhlenbeck;
  cfg.noise_sigma = 0.3;
  cfg.ou_theta = 0.2;
  Rng init(1);
  DdpgAgent agent(3, 2, cfg, init);
  CHECK(agent.exploration().kind == NoiseKind::kOrnsteinUhlenbeck);
  CHECK(agent.exploration().sigma == 0.3);
  CHECK(agent.exploration().theta == 0.2);
  Td3Config t;
  t.hidden = {4};
  Rng i2(1);
  Td3Agent td3(3, 2, t, i2);
  CHECK(td3.exploration().kind == NoiseKind::kGaussian);
  CHECK(td3.exploration().sigma == t.exploration_noise);
}

TEST_CASE("baseline checkpoints round trip") {
  Rng data(7);
  replay::UniformBuffer buf(200, 3, 2);
  fill(buf, 60, data);
  Td3Config cfg;
  cfg.hidden = {8};
  cfg.batch_size = 8;
  Rng i1(1);
  Td3Agent a(3, 2, cfg, i1);
  Rng rng(2);
  for (int i = 0; i < 4; ++i) a.train_step(buf, rng);
  std::stringstream ss;
  a.save(ss);
  Rng i2(9);
  Td3Agent b(3, 2, cfg, i2);
  b.load(ss);
  CHECK(b.checksum() == a.checksum());

  DdpgConfig dc;
  dc.hidden = {8};
  Rng i3(1);
  DdpgAgent d(3, 2, dc, i3);
  std::stringstream wrong;
  a.save(wrong);
  CHECK_THROWS_AS(d.load(wrong), CheckpointError);
}

TEST_CASE("baseline configuration validation") {
  Rng rng(1);
  Td3Config t;
  t.policy_freq = 0;
  CHECK_THROWS_AS(Td3Agent(3, 2, t, rng), ConfigError);
  DdpgConfig d;
  d.tau = 0.0;
  CHECK_THROWS_AS(DdpgAgent(3, 2, d, rng), ConfigError);
  d = DdpgConfig{};
  d.noise_sigma = -1.0;
  CHECK_THROWS_AS(DdpgAgent(3, 2, d, rng), ConfigError);
}
