#include "slicebench/agent.hpp"

#include <algorithm>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

#include "slicebench/errors.hpp"

namespace slicebench::agent {

namespace {

constexpr char kAgentMagic[4] = {'S', 'B', 'A', 'G'};
constexpr std::uint32_t kAgentFormatVersion = 1;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw CheckpointError("agent checkpoint truncated");
  return value;
}

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

void fnv_mix_net(std::uint64_t& h, const nn::Mlp& net) {
  for (const auto& l : net.layers()) {
    fnv_mix(h, l.weight.data(), sizeof(double) * static_cast<std::size_t>(l.weight.size()));
    fnv_mix(h, l.bias.data(), sizeof(double) * static_cast<std::size_t>(l.bias.size()));
  }
}

}  // namespace

double squash_log_std(double raw) { return kLogStdBound * std::tanh(raw / kLogStdBound); }

double squash_log_std_derivative(double raw) {
  const double t = std::tanh(raw / kLogStdBound);
  return 1.0 - t * t;
}

double unsquash_log_std(double log_std) { return kLogStdBound * std::atanh(log_std / kLogStdBound); }

double gaussian_nll(double y, double mu, double sigma) {
  const double z = (y - mu) / sigma;
  return kHalfLog2Pi + std::log(sigma) + 0.5 * z * z;
}

Explorer::Explorer(ExplorationConfig config, std::size_t action_dim)
    : config_(config), ou_state_(action_dim, 0.0) {}

void Explorer::reset() { std::fill(ou_state_.begin(), ou_state_.end(), 0.0); }

std::vector<double> Explorer::perturb(std::span<const double> action, Rng& rng) {
  std::vector<double> out(action.begin(), action.end());
  if (ou_state_.size() != out.size()) ou_state_.assign(out.size(), 0.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double noise = 0.0;
    if (config_.kind == NoiseKind::kGaussian) {
      noise = config_.sigma > 0.0 ? config_.sigma * normal(rng) : 0.0;
    } else {
      ou_state_[i] += -config_.theta * ou_state_[i] + config_.sigma * normal(rng);
      noise = ou_state_[i];
    }
    out[i] = std::clamp(out[i] + noise, kActionLow, kActionHigh);
  }
  return out;
}

std::vector<double> policy_action(const nn::Mlp& actor, std::span<const double> obs) {
  const Eigen::VectorXd a = actor.forward(obs);
  std::vector<double> out(a.data(), a.data() + a.size());
  for (double& x : out) x = std::clamp(x, kActionLow, kActionHigh);
  return out;
}

std::vector<double> uniform_action(std::size_t action_dim, Rng& rng) {
  std::uniform_real_distribution<double> u(kActionLow, kActionHigh);
  std::vector<double> out(action_dim);
  for (double& x : out) x = u(rng);
  return out;
}

Diagnostics ActorCriticAgent::train_step(replay::ReplayBuffer& buffer, Rng& rng) {
  replay::Batch batch = buffer.sample(batch_size(), rng);
  const CriticStep step = compute_critic_step(std::move(batch), rng);
  const Diagnostics diag = apply_update(step);
  buffer.update_priorities(step.batch.indices, step.priorities);
  return diag;
}

Diagnostics ActorCriticAgent::apply_update(const CriticStep& step) {
  Diagnostics diag = step.diag;
  if (!diag.finite) {
    ++skipped_updates_;
    return diag;
  }
  apply_critic_grads(step.critic_grads);
  ++critic_updates_;
  if (critic_updates_ % policy_frequency() == 0) {
    double grad_norm = 0.0;
    diag.actor_objective = actor_step(step.batch, grad_norm);
    diag.actor_grad_norm = grad_norm;
    diag.actor_updated = true;
    ++actor_updates_;
    target_actor_.soft_update_from(actor_, tau());
    soft_update_critics(tau());
    ++soft_updates_;
  }
  return diag;
}

nn::Gradients ActorCriticAgent::actor_gradient(const Eigen::MatrixXd& states, double* q_mean) const {
  const auto n = static_cast<double>(states.cols());
  nn::ForwardCache actor_cache;
  const Eigen::MatrixXd actions = actor_.forward(states, actor_cache);
  const nn::Mlp& critic = policy_critic();
  nn::ForwardCache critic_cache;
  const Eigen::MatrixXd out = critic.forward(stack(states, actions), critic_cache);
  Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  grad_out.row(q_row()).setConstant(-1.0 / n);
  const nn::BackwardResult through_critic = critic.backward(critic_cache, grad_out, false);
  const auto ad = static_cast<Eigen::Index>(action_dim_);
  if (q_mean) *q_mean = out.row(q_row()).mean();
  return actor_.backward(actor_cache, through_critic.input.bottomRows(ad), true).params;
}

double ActorCriticAgent::actor_step(const replay::Batch& batch, double& grad_norm) {
  double q_mean = 0.0;
  const nn::Gradients grads = actor_gradient(batch.states, &q_mean);
  grad_norm = nn::gradient_norm(grads);
  if (nn::all_finite(grads)) actor_opt_.step(actor_, grads);
  return q_mean;
}

void ActorCriticAgent::init_actor(const std::vector<std::size_t>& hidden, nn::Activation act, Rng& rng) {
  std::vector<std::size_t> widths{state_dim_};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(action_dim_);
  actor_ = nn::Mlp(widths, act, nn::Activation::kTanh, rng);
  target_actor_ = actor_;
  actor_opt_ = nn::Adam(actor_, actor_lr());
}

Eigen::MatrixXd ActorCriticAgent::smoothed_target_actions(const Eigen::MatrixXd& next_states, double sigma,
                                                          double clip, Rng& rng, double& noise_max) const {
  Eigen::MatrixXd a = target_actor_.forward(next_states);
  std::normal_distribution<double> normal(0.0, 1.0);
  noise_max = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double eps = sigma > 0.0 ? std::clamp(sigma * normal(rng), -clip, clip) : 0.0;
      noise_max = std::max(noise_max, std::abs(eps));
      a(i, j) = std::clamp(a(i, j) + eps, kActionLow, kActionHigh);
    }
  }
  return a;
}

Eigen::MatrixXd ActorCriticAgent::stack(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
  Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
  x.topRows(states.rows()) = states;
  x.bottomRows(actions.rows()) = actions;
  return x;
}

std::uint64_t ActorCriticAgent::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  fnv_mix_net(h, actor_);
  fnv_mix_net(h, target_actor_);
  for (const nn::Mlp* c : critics()) fnv_mix_net(h, *c);
  for (const nn::Mlp* c : target_critics()) fnv_mix_net(h, *c);
  fnv_mix(h, &critic_updates_, sizeof critic_updates_);
  fnv_mix(h, &actor_updates_, sizeof actor_updates_);
  return h;
}

void ActorCriticAgent::save(std::ostream& os) const {
  os.write(kAgentMagic, 4);
  put<std::uint32_t>(os, kAgentFormatVersion);
  const std::string id(name());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(id.size()));
  os.write(id.data(), static_cast<std::streamsize>(id.size()));
  put<std::uint64_t>(os, state_dim_);
  put<std::uint64_t>(os, action_dim_);
  put<std::uint64_t>(os, critic_updates_);
  put<std::uint64_t>(os, actor_updates_);
  put<std::uint64_t>(os, soft_updates_);
  put<std::uint64_t>(os, skipped_updates_);
  nn::write_mlp(os, actor_);
  nn::write_mlp(os, target_actor_);
  actor_opt_.write(os);
  write_critics(os);
  if (!os) throw CheckpointError("failed to write agent checkpoint");
}

void ActorCriticAgent::load(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kAgentMagic, 4) != 0)
    throw CheckpointError("not an agent checkpoint");
  const auto version = get<std::uint32_t>(is);
  if (version != kAgentFormatVersion)
    throw CheckpointError("unsupported agent checkpoint version " + std::to_string(version));
  const auto len = get<std::uint32_t>(is);
  std::string id(len, '\0');
  if (!is.read(id.data(), len)) throw CheckpointError("agent checkpoint truncated");
  if (id != name()) throw CheckpointError("checkpoint holds agent '" + id + "', expected '" + std::string(name()) + "'");
  if (get<std::uint64_t>(is) != state_dim_ || get<std::uint64_t>(is) != action_dim_)
    throw CheckpointError("checkpoint dimensions do not match the environment");
  critic_updates_ = get<std::uint64_t>(is);
  actor_updates_ = get<std::uint64_t>(is);
  soft_updates_ = get<std::uint64_t>(is);
  skipped_updates_ = get<std::uint64_t>(is);
  nn::Mlp actor = nn::read_mlp(is);
  nn::Mlp target = nn::read_mlp(is);
  if (actor.widths() != actor_.widths() || target.widths() != actor_.widths())
    throw CheckpointError("checkpoint actor architecture does not match the configuration");
  actor_ = std::move(actor);
  target_actor_ = std::move(target);
  actor_opt_ = nn::Adam::read(is);
  read_critics(is);
}

void DTd3Config::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("dtd3.gamma must be in (0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("dtd3.tau must be in (0, 1]");
  if (!(clip_boundary > 0.0)) throw ConfigError("dtd3.clip_boundary must be positive");
  if (policy_freq < 1) throw ConfigError("dtd3.policy_freq must be >= 1");
  if (batch_size < 1) throw ConfigError("dtd3.batch_size must be >= 1");
  if (target_samples < 1) throw ConfigError("dtd3.target_samples must be >= 1");
  if (!(initial_sigma >= 1e-3 && initial_sigma <= 1e3)) throw ConfigError("dtd3.initial_sigma must be in [1e-3, 1e3]");
  if (!(exploration_noise >= 0.0) || !(smoothing_noise >= 0.0) || !(smoothing_clip >= 0.0))
    throw ConfigError("dtd3 noise parameters must be non-negative");
  if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw ConfigError("dtd3 learning rates must be positive");
  if (!(reward_scale > 0.0)) throw ConfigError("dtd3.reward_scale must be positive");
}

DTd3Agent::DTd3Agent(std::size_t state_dim, std::size_t action_dim, DTd3Config config, Rng& rng)
    : ActorCriticAgent(state_dim, action_dim), config_(std::move(config)) {
  config_.validate();
  init_actor(config_.hidden, config_.activation, rng);
  std::vector<std::size_t> widths{state_dim + action_dim};
  widths.insert(widths.end(), config_.hidden.begin(), config_.hidden.end());
  widths.push_back(2);
  critic_ = nn::Mlp(widths, config_.activation, nn::Activation::kLinear, rng);
  critic_.layers().back().bias(1) = unsquash_log_std(std::log(config_.initial_sigma));
  target_critic_ = critic_;
  critic_opt_ = nn::Adam(critic_, config_.critic_lr);
}

std::unique_ptr<ActorCriticAgent> DTd3Agent::clone() const { return std::make_unique<DTd3Agent>(*this); }

ExplorationConfig DTd3Agent::exploration() const {
  return {NoiseKind::kGaussian, config_.exploration_noise, 0.15};
}

GaussianReturn DTd3Agent::evaluate(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const {
  const Eigen::MatrixXd out = critic_.forward(stack(states, actions));
  GaussianReturn g;
  g.mean = out.row(0).transpose();
  g.log_std = out.row(1).transpose().unaryExpr([](double r) { return squash_log_std(r); });
  return g;
}

GaussianReturn DTd3Agent::evaluate_target(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const {
  const Eigen::MatrixXd out = target_critic_.forward(stack(states, actions));
  GaussianReturn g;
  g.mean = out.row(0).transpose();
  g.log_std = out.row(1).transpose().unaryExpr([](double r) { return squash_log_std(r); });
  return g;
}

Eigen::VectorXd DTd3Agent::bellman_targets(const Eigen::VectorXd& scaled_rewards, const Eigen::VectorXd& terminals,
                                           const Eigen::VectorXd& z_next, const Eigen::VectorXd& q, double gamma,
                                           double g) {
  Eigen::VectorXd y(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double raw = scaled_rewards(i) + gamma * (1.0 - terminals(i)) * z_next(i);
    y(i) = std::clamp(raw, q(i) - g, q(i) + g);
  }
  return y;
}

CriticStep DTd3Agent::compute_critic_step(replay::Batch batch, Rng& rng) const {
  CriticStep step;
  Diagnostics& diag = step.diag;
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  const Eigen::MatrixXd target_actions =
      smoothed_target_actions(batch.next_states, config_.smoothing_noise, config_.smoothing_clip, rng,
                              diag.smoothing_noise_max);
  const GaussianReturn next = evaluate_target(batch.next_states, target_actions);
  const Eigen::VectorXd next_sigma = next.sigma();

  nn::ForwardCache cache;
  const Eigen::MatrixXd out = critic_.forward(stack(batch.states, batch.actions), cache);
  const Eigen::VectorXd mu = out.row(0).transpose();
  const Eigen::VectorXd raw = out.row(1).transpose();
  Eigen::VectorXd log_std(n);
  for (Eigen::Index i = 0; i < n; ++i) log_std(i) = squash_log_std(raw(i));
  const Eigen::VectorXd sigma = log_std.array().exp().matrix();

  const Eigen::VectorXd scaled_r = config_.reward_scale * batch.rewards;
  const auto k = static_cast<double>(config_.target_samples);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd losses = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd excess = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd d_mu = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd d_ls = Eigen::VectorXd::Zero(n);
  for (std::size_t draw = 0; draw < config_.target_samples; ++draw) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = next.mean(i) + next_sigma(i) * normal(rng);
    Eigen::VectorXd raw_y(n);
    for (Eigen::Index i = 0; i < n; ++i)
      raw_y(i) = scaled_r(i) + config_.gamma * (1.0 - batch.terminals(i)) * z(i);
    const Eigen::VectorXd y = bellman_targets(scaled_r, batch.terminals, z, mu, config_.gamma, config_.clip_boundary);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = (y(i) - mu(i)) / sigma(i);
      losses(i) += (kHalfLog2Pi + log_std(i) + 0.5 * r * r) / k;
      excess(i) += 0.5 * r * r / k;
      d_mu(i) += -(y(i) - mu(i)) / (sigma(i) * sigma(i)) / k;
      d_ls(i) += (1.0 - r * r) / k;
      diag.target_gap_max = std::max(diag.target_gap_max, std::abs(y(i) - mu(i)));
      if (std::abs(raw_y(i) - mu(i)) > config_.clip_boundary) ++diag.targets_clipped;
    }
  }

  Eigen::MatrixXd grad_out(2, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = batch.weights(i) * inv_n;
    total += w * losses(i);
    grad_out(0, i) = w * d_mu(i);
    grad_out(1, i) = w * d_ls(i) * squash_log_std_derivative(raw(i));
  }
  nn::BackwardResult back = critic_.backward(cache, grad_out, true);

  diag.critic_loss = total;
  diag.q_mean = mu.mean();
  diag.sigma_min = sigma.minCoeff();
  diag.sigma_max = sigma.maxCoeff();
  diag.critic_grad_norm = nn::gradient_norm(back.params);
  diag.finite = std::isfinite(total) && nn::all_finite(back.params);

  const Eigen::VectorXd& prio = config_.priority_transform == PriorityTransform::kNll ? losses : excess;
  step.priorities.assign(prio.data(), prio.data() + n);
  step.critic_grads.push_back(std::move(back.params));
  step.batch = std::move(batch);
  return step;
}

void DTd3Agent::apply_critic_grads(const std::vector<nn::Gradients>& grads) {
  if (grads.size() != 1) throw ShapeMismatch("dtd3 expects one critic gradient set");
  critic_opt_.step(critic_, grads[0]);
}

void DTd3Agent::soft_update_critics(double tau) { target_critic_.soft_update_from(critic_, tau); }

void DTd3Agent::write_critics(std::ostream& os) const {
  nn::write_mlp(os, critic_);
  nn::write_mlp(os, target_critic_);
  critic_opt_.write(os);
}

void DTd3Agent::read_critics(std::istream& is) {
  nn::Mlp critic = nn::read_mlp(is);
  nn::Mlp target = nn::read_mlp(is);
  if (critic.widths() != critic_.widths() || target.widths() != critic_.widths())
    throw CheckpointError("checkpoint critic architecture does not match the configuration");
  critic_ = std::move(critic);
  target_critic_ = std::move(target);
  critic_opt_ = nn::Adam::read(is);
}

}  // namespace slicebench::agent
