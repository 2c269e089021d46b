#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "slicebench/agent.hpp"

namespace slicebench::agent {

struct Td3Config {
  std::vector<std::size_t> hidden{400, 300};
  nn::Activation activation = nn::Activation::kRelu;
  double gamma = 0.99;
  double tau = 0.005;
  double exploration_noise = 0.1;
  double smoothing_noise = 0.2;
  double smoothing_clip = 0.5;
  std::size_t policy_freq = 2;
  std::size_t batch_size = 100;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double reward_scale = 1.0;

  void validate() const;
  bool operator==(const Td3Config&) const = default;
};

/// Twin critics; the target takes the smaller of the two target estimates.
class Td3Agent final : public ActorCriticAgent {
 public:
  Td3Agent(std::size_t state_dim, std::size_t action_dim, Td3Config config, Rng& rng);

  std::string_view name() const override { return "td3"; }
  std::unique_ptr<ActorCriticAgent> clone() const override;
  std::size_t batch_size() const override { return config_.batch_size; }
  std::size_t policy_frequency() const override { return config_.policy_freq; }
  ExplorationConfig exploration() const override;

  CriticStep compute_critic_step(replay::Batch batch, Rng& rng) const override;

  std::vector<const nn::Mlp*> critics() const override { return {&critic1_, &critic2_}; }
  std::vector<const nn::Mlp*> target_critics() const override { return {&target1_, &target2_}; }

  /// y = r + gamma (1 - done) min(q1', q2').
  static Eigen::VectorXd targets(const Eigen::VectorXd& scaled_rewards, const Eigen::VectorXd& terminals,
                                 const Eigen::VectorXd& q1_next, const Eigen::VectorXd& q2_next, double gamma);

  const Td3Config& config() const { return config_; }

 protected:
  void apply_critic_grads(const std::vector<nn::Gradients>& grads) override;
  void soft_update_critics(double tau) override;
  double tau() const override { return config_.tau; }
  double actor_lr() const override { return config_.actor_lr; }
  const nn::Mlp& policy_critic() const override { return critic1_; }
  void write_critics(std::ostream& os) const override;
  void read_critics(std::istream& is) override;

 private:
  Td3Config config_;
  nn::Mlp critic1_, critic2_;
  nn::Mlp target1_, target2_;
  nn::Adam opt1_, opt2_;
};

struct DdpgConfig {
  std::vector<std::size_t> hidden{200, 200};
  nn::Activation activation = nn::Activation::kRelu;
  double gamma = 0.99;
  double tau = 0.001;
  NoiseKind noise = NoiseKind::kGaussian;
  double noise_sigma = 0.2;
  double ou_theta = 0.15;
  std::size_t batch_size = 64;
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  double reward_scale = 1.0;

  void validate() const;
  bool operator==(const DdpgConfig&) const = default;
};

/// Single critic, unsmoothed target action, actor update every critic step.
class DdpgAgent final : public ActorCriticAgent {
 public:
  DdpgAgent(std::size_t state_dim, std::size_t action_dim, DdpgConfig config, Rng& rng);

  std::string_view name() const override { return "ddpg"; }
  std::unique_ptr<ActorCriticAgent> clone() const override;
  std::size_t batch_size() const override { return config_.batch_size; }
  std::size_t policy_frequency() const override { return 1; }
  ExplorationConfig exploration() const override;

  CriticStep compute_critic_step(replay::Batch batch, Rng& rng) const override;

  std::vector<const nn::Mlp*> critics() const override { return {&critic_}; }
  std::vector<const nn::Mlp*> target_critics() const override { return {&target_critic_}; }

  /// y = r + gamma (1 - done) q'.
  static Eigen::VectorXd targets(const Eigen::VectorXd& scaled_rewards, const Eigen::VectorXd& terminals,
                                 const Eigen::VectorXd& q_next, double gamma);

  const DdpgConfig& config() const { return config_; }

 protected:
  void apply_critic_grads(const std::vector<nn::Gradients>& grads) override;
  void soft_update_critics(double tau) override;
  double tau() const override { return config_.tau; }
  double actor_lr() const override { return config_.actor_lr; }
  const nn::Mlp& policy_critic() const override { return critic_; }
  void write_critics(std::ostream& os) const override;
  void read_critics(std::istream& is) override;

 private:
  DdpgConfig config_;
  nn::Mlp critic_;
  nn::Mlp target_critic_;
  nn::Adam opt_;
};

}  // namespace slicebench::agent
