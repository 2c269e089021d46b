#include "slicebench/baselines.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "slicebench/errors.hpp"

namespace slicebench::agent {

namespace {

std::vector<std::size_t> critic_widths(std::size_t in, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(1);
  return w;
}

struct SquaredError {
  nn::Gradients grads;
  Eigen::VectorXd q;
  double loss = 0.0;
};

/// Weighted mean of (Q - y)^2 and its parameter gradient.
SquaredError squared_error(const nn::Mlp& critic, const Eigen::MatrixXd& inputs, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& weights) {
  nn::ForwardCache cache;
  const Eigen::MatrixXd out = critic.forward(inputs, cache);
  SquaredError r;
  r.q = out.row(0).transpose();
  const double inv_n = 1.0 / static_cast<double>(y.size());
  Eigen::MatrixXd grad_out(1, y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double e = r.q(i) - y(i);
    r.loss += weights(i) * e * e * inv_n;
    grad_out(0, i) = 2.0 * weights(i) * e * inv_n;
  }
  r.grads = critic.backward(cache, grad_out, true).params;
  return r;
}

void check_common(double gamma, double tau, std::size_t batch, double actor_lr, double critic_lr,
                  double reward_scale, const char* who) {
  const std::string p(who);
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError(p + ".gamma must be in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError(p + ".tau must be in (0, 1]");
  if (batch < 1) throw ConfigError(p + ".batch_size must be >= 1");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError(p + " learning rates must be positive");
  if (!(reward_scale > 0.0)) throw ConfigError(p + ".reward_scale must be positive");
}

}  // namespace

void Td3Config::validate() const {
  check_common(gamma, tau, batch_size, actor_lr, critic_lr, reward_scale, "td3");
  if (policy_freq < 1) throw ConfigError("td3.policy_freq must be >= 1");
  if (!(exploration_noise >= 0.0) || !(smoothing_noise >= 0.0) || !(smoothing_clip >= 0.0))
    throw ConfigError("td3 noise parameters must be non-negative");
}

Td3Agent::Td3Agent(std::size_t state_dim, std::size_t action_dim, Td3Config config, Rng& rng)
    : ActorCriticAgent(state_dim, action_dim), config_(std::move(config)) {
  config_.validate();
  init_actor(config_.hidden, config_.activation, rng);
  const auto widths = critic_widths(state_dim + action_dim, config_.hidden);
  critic1_ = nn::Mlp(widths, config_.activation, nn::Activation::kLinear, rng);
  critic2_ = nn::Mlp(widths, config_.activation, nn::Activation::kLinear, rng);
  target1_ = critic1_;
  target2_ = critic2_;
  opt1_ = nn::Adam(critic1_, config_.critic_lr);
  opt2_ = nn::Adam(critic2_, config_.critic_lr);
}

std::unique_ptr<ActorCriticAgent> Td3Agent::clone() const { return std::make_unique<Td3Agent>(*this); }

ExplorationConfig Td3Agent::exploration() const {
  return {NoiseKind::kGaussian, config_.exploration_noise, 0.15};
}

Eigen::VectorXd Td3Agent::targets(const Eigen::VectorXd& scaled_rewards, const Eigen::VectorXd& terminals,
                                  const Eigen::VectorXd& q1_next, const Eigen::VectorXd& q2_next, double gamma) {
  return (scaled_rewards.array() +
          gamma * (1.0 - terminals.array()) * q1_next.array().min(q2_next.array()))
      .matrix();
}

CriticStep Td3Agent::compute_critic_step(replay::Batch batch, Rng& rng) const {
  CriticStep step;
  Diagnostics& diag = step.diag;
  const Eigen::MatrixXd next_actions = smoothed_target_actions(
      batch.next_states, config_.smoothing_noise, config_.smoothing_clip, rng, diag.smoothing_noise_max);
  const Eigen::MatrixXd next_in = stack(batch.next_states, next_actions);
  const Eigen::VectorXd q1n = target1_.forward(next_in).row(0).transpose();
  const Eigen::VectorXd q2n = target2_.forward(next_in).row(0).transpose();
  const Eigen::VectorXd y =
      targets(config_.reward_scale * batch.rewards, batch.terminals, q1n, q2n, config_.gamma);

  const Eigen::MatrixXd in = stack(batch.states, batch.actions);
  SquaredError e1 = squared_error(critic1_, in, y, batch.weights);
  SquaredError e2 = squared_error(critic2_, in, y, batch.weights);

  diag.critic_loss = 0.5 * (e1.loss + e2.loss);
  diag.q_mean = e1.q.mean();
  diag.target_gap_max = (y - e1.q).cwiseAbs().maxCoeff();
  diag.critic_grad_norm = std::hypot(nn::gradient_norm(e1.grads), nn::gradient_norm(e2.grads));
  diag.finite = std::isfinite(diag.critic_loss) && nn::all_finite(e1.grads) && nn::all_finite(e2.grads);

  step.priorities.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    step.priorities[i] = std::abs(e1.q(j) - y(j));
  }
  step.critic_grads.push_back(std::move(e1.grads));
  step.critic_grads.push_back(std::move(e2.grads));
  step.batch = std::move(batch);
  return step;
}

void Td3Agent::apply_critic_grads(const std::vector<nn::Gradients>& grads) {
  if (grads.size() != 2) throw ShapeMismatch("td3 expects two critic gradient sets");
  opt1_.step(critic1_, grads[0]);
  opt2_.step(critic2_, grads[1]);
}

void Td3Agent::soft_update_critics(double tau) {
  target1_.soft_update_from(critic1_, tau);
  target2_.soft_update_from(critic2_, tau);
}

void Td3Agent::write_critics(std::ostream& os) const {
  nn::write_mlp(os, critic1_);
  nn::write_mlp(os, critic2_);
  nn::write_mlp(os, target1_);
  nn::write_mlp(os, target2_);
  opt1_.write(os);
  opt2_.write(os);
}

void Td3Agent::read_critics(std::istream& is) {
  nn::Mlp c1 = nn::read_mlp(is), c2 = nn::read_mlp(is), t1 = nn::read_mlp(is), t2 = nn::read_mlp(is);
  const auto w = critic1_.widths();
  if (c1.widths() != w || c2.widths() != w || t1.widths() != w || t2.widths() != w)
    throw CheckpointError("checkpoint critic architecture does not match the configuration");
  critic1_ = std::move(c1);
  critic2_ = std::move(c2);
  target1_ = std::move(t1);
  target2_ = std::move(t2);
  opt1_ = nn::Adam::read(is);
  opt2_ = nn::Adam::read(is);
}

void DdpgConfig::validate() const {
  check_common(gamma, tau, batch_size, actor_lr, critic_lr, reward_scale, "ddpg");
  if (!(noise_sigma >= 0.0)) throw ConfigError("ddpg.noise_sigma must be non-negative");
  if (!(ou_theta >= 0.0 && ou_theta <= 1.0)) throw ConfigError("ddpg.ou_theta must be in [0, 1]");
}

DdpgAgent::DdpgAgent(std::size_t state_dim, std::size_t action_dim, DdpgConfig config, Rng& rng)
    : ActorCriticAgent(state_dim, action_dim), config_(std::move(config)) {
  config_.validate();
  init_actor(config_.hidden, config_.activation, rng);
  critic_ = nn::Mlp(critic_widths(state_dim + action_dim, config_.hidden), config_.activation,
                    nn::Activation::kLinear, rng);
  target_critic_ = critic_;
  opt_ = nn::Adam(critic_, config_.critic_lr);
}

std::unique_ptr<ActorCriticAgent> DdpgAgent::clone() const { return std::make_unique<DdpgAgent>(*this); }

ExplorationConfig DdpgAgent::exploration() const { return {config_.noise, config_.noise_sigma, config_.ou_theta}; }

Eigen::VectorXd DdpgAgent::targets(const Eigen::VectorXd& scaled_rewards, const Eigen::VectorXd& terminals,
                                   const Eigen::VectorXd& q_next, double gamma) {
  return (scaled_rewards.array() + gamma * (1.0 - terminals.array()) * q_next.array()).matrix();
}

CriticStep DdpgAgent::compute_critic_step(replay::Batch batch, Rng& /*rng*/) const {
  CriticStep step;
  Diagnostics& diag = step.diag;
  const Eigen::MatrixXd next_actions = target_actor_.forward(batch.next_states);
  const Eigen::VectorXd qn = target_critic_.forward(stack(batch.next_states, next_actions)).row(0).transpose();
  const Eigen::VectorXd y = targets(config_.reward_scale * batch.rewards, batch.terminals, qn, config_.gamma);
  SquaredError e = squared_error(critic_, stack(batch.states, batch.actions), y, batch.weights);

  diag.critic_loss = e.loss;
  diag.q_mean = e.q.mean();
  diag.target_gap_max = (y - e.q).cwiseAbs().maxCoeff();
  diag.critic_grad_norm = nn::gradient_norm(e.grads);
  diag.finite = std::isfinite(e.loss) && nn::all_finite(e.grads);

  step.priorities.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    step.priorities[i] = std::abs(e.q(j) - y(j));
  }
  step.critic_grads.push_back(std::move(e.grads));
  step.batch = std::move(batch);
  return step;
}

void DdpgAgent::apply_critic_grads(const std::vector<nn::Gradients>& grads) {
  if (grads.size() != 1) throw ShapeMismatch("ddpg expects one critic gradient set");
  opt_.step(critic_, grads[0]);
}

void DdpgAgent::soft_update_critics(double tau) { target_critic_.soft_update_from(critic_, tau); }

void DdpgAgent::write_critics(std::ostream& os) const {
  nn::write_mlp(os, critic_);
  nn::write_mlp(os, target_critic_);
  opt_.write(os);
}

void DdpgAgent::read_critics(std::istream& is) {
  nn::Mlp c = nn::read_mlp(is), t = nn::read_mlp(is);
  if (c.widths() != critic_.widths() || t.widths() != critic_.widths())
    throw CheckpointError("checkpoint critic architecture does not match the configuration");
  critic_ = std::move(c);
  target_critic_ = std::move(t);
  opt_ = nn::Adam::read(is);
}

}  // namespace slicebench::agent
