#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "slicebench/nn.hpp"
#include "slicebench/replay.hpp"
#include "slicebench/rng.hpp"

namespace slicebench::agent {

/// Agents act in the normalized cube [-1, 1]^action_dim.
inline constexpr double kActionLow = -1.0;
inline constexpr double kActionHigh = 1.0;

/// log_std = L * tanh(raw / L) with L = ln(1e3), so sigma stays inside [1e-3, 1e3].
inline const double kLogStdBound = std::log(1e3);

struct GaussianReturn {
  Eigen::VectorXd mean;
  Eigen::VectorXd log_std;

  Eigen::VectorXd sigma() const { return log_std.array().exp().matrix(); }
};

/// Maps the raw second critic head to the bounded log standard deviation.
double squash_log_std(double raw);
double squash_log_std_derivative(double raw);
double unsquash_log_std(double log_std);

/// Per-transition Gaussian negative log-likelihood
///   0.5 log(2 pi sigma^2) + (y - mu)^2 / (2 sigma^2).
double gaussian_nll(double y, double mu, double sigma);

enum class NoiseKind { kGaussian, kOrnsteinUhlenbeck };

struct ExplorationConfig {
  NoiseKind kind = NoiseKind::kGaussian;
  double sigma = 0.1;
  double theta = 0.15;  // OU mean reversion
};

/// Behaviour noise added to the deterministic policy output.
class Explorer {
 public:
  Explorer() = default;
  Explorer(ExplorationConfig config, std::size_t action_dim);

  void reset();
  /// a + noise, clipped to the action cube.
  std::vector<double> perturb(std::span<const double> action, Rng& rng);
  const ExplorationConfig& config() const { return config_; }

 private:
  ExplorationConfig config_;
  std::vector<double> ou_state_;
};

/// Deterministic tanh-squashed policy evaluation: pi(s) for a single state.
std::vector<double> policy_action(const nn::Mlp& actor, std::span<const double> obs);

std::vector<double> uniform_action(std::size_t action_dim, Rng& rng);

struct Diagnostics {
  double critic_loss = 0.0;
  double actor_objective = 0.0;  // mean Q(s, pi(s)) at the last actor step
  double q_mean = 0.0;
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  double target_gap_max = 0.0;     // max |y - Q| after clipping
  std::size_t targets_clipped = 0;
  double smoothing_noise_max = 0.0;
  double critic_grad_norm = 0.0;
  double actor_grad_norm = 0.0;
  bool actor_updated = false;
  bool finite = true;
};

/// Gradients computed against a (possibly stale) copy of the agent,
/// ready to be applied to the master parameters.
struct CriticStep {
  replay::Batch batch;
  std::vector<nn::Gradients> critic_grads;
  std::vector<double> priorities;
  Diagnostics diag;
};

/// Shared structure of the deterministic actor-critic learners:
///   sample -> critic step -> priority update -> every freq critic steps an
///   actor step followed by the soft target update.
class ActorCriticAgent {
 public:
  virtual ~ActorCriticAgent() = default;

  virtual std::string_view name() const = 0;
  virtual std::unique_ptr<ActorCriticAgent> clone() const = 0;

  virtual std::size_t batch_size() const = 0;
  virtual std::size_t policy_frequency() const = 0;
  virtual ExplorationConfig exploration() const = 0;

  virtual CriticStep compute_critic_step(replay::Batch batch, Rng& rng) const = 0;

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  const nn::Mlp& actor() const { return actor_; }
  const nn::Mlp& target_actor() const { return target_actor_; }
  virtual std::vector<const nn::Mlp*> critics() const = 0;
  virtual std::vector<const nn::Mlp*> target_critics() const = 0;

  /// Noiseless policy output in the action cube.
  std::vector<double> act(std::span<const double> obs) const { return policy_action(actor_, obs); }

  /// Gradient of -mean_s Q(s, pi(s)) with respect to the actor parameters.
  nn::Gradients actor_gradient(const Eigen::MatrixXd& states, double* q_mean = nullptr) const;

  /// One full update on a batch drawn from the buffer.
  Diagnostics train_step(replay::ReplayBuffer& buffer, Rng& rng);

  /// Applies a critic step to these parameters and, when due, the actor and
  /// soft target updates. Returns the step's diagnostics.
  Diagnostics apply_update(const CriticStep& step);

  std::uint64_t critic_updates() const { return critic_updates_; }
  std::uint64_t actor_updates() const { return actor_updates_; }
  std::uint64_t soft_updates() const { return soft_updates_; }
  std::uint64_t skipped_updates() const { return skipped_updates_; }

  /// Sum of all network parameters and counters folded in a 64-bit hash.
  std::uint64_t checksum() const;

  void save(std::ostream& os) const;
  void load(std::istream& is);

 protected:
  ActorCriticAgent(std::size_t state_dim, std::size_t action_dim)
      : state_dim_(state_dim), action_dim_(action_dim) {}

  virtual void apply_critic_grads(const std::vector<nn::Gradients>& grads) = 0;
  virtual void soft_update_critics(double tau) = 0;
  virtual double tau() const = 0;
  virtual double actor_lr() const = 0;
  /// The critic whose mean drives the policy gradient.
  virtual const nn::Mlp& policy_critic() const = 0;
  /// Output row of policy_critic() holding Q.
  virtual Eigen::Index q_row() const { return 0; }

  virtual void write_critics(std::ostream& os) const = 0;
  virtual void read_critics(std::istream& is) = 0;

  /// Deterministic policy gradient step on the actor. Returns mean Q.
  double actor_step(const replay::Batch& batch, double& grad_norm);
  void init_actor(const std::vector<std::size_t>& hidden, nn::Activation act, Rng& rng);

  /// Target-policy smoothing: pi'(s') + clip(N(0, sigma), -c, c), clipped to the cube.
  Eigen::MatrixXd smoothed_target_actions(const Eigen::MatrixXd& next_states, double sigma, double clip,
                                          Rng& rng, double& noise_max) const;

  static Eigen::MatrixXd stack(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions);

  std::size_t state_dim_;
  std::size_t action_dim_;
  nn::Mlp actor_;
  nn::Mlp target_actor_;
  nn::Adam actor_opt_;
  std::uint64_t critic_updates_ = 0;
  std::uint64_t actor_updates_ = 0;
  std::uint64_t soft_updates_ = 0;
  std::uint64_t skipped_updates_ = 0;
};

enum class PriorityTransform {
  kNll,        // the per-transition loss itself
  kNllExcess,  // loss minus its value at y = mu, i.e. (y - mu)^2 / (2 sigma^2)
};

struct DTd3Config {
  std::vector<std::size_t> hidden{128, 128, 128, 128, 128};
  nn::Activation activation = nn::Activation::kGelu;
  double gamma = 0.99;
  double tau = 0.001;
  double exploration_noise = 0.1;
  double smoothing_noise = 0.2;
  double smoothing_clip = 0.5;
  double clip_boundary = 18.0;
  std::size_t policy_freq = 2;
  std::size_t batch_size = 128;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double reward_scale = 0.2;
  std::size_t target_samples = 1;
  double initial_sigma = 0.002;
  PriorityTransform priority_transform = PriorityTransform::kNll;

  void validate() const;
  bool operator==(const DTd3Config&) const = default;
};

/// Critic output rows: 0 = mean, 1 = raw log_std.
class DTd3Agent final : public ActorCriticAgent {
 public:
  DTd3Agent(std::size_t state_dim, std::size_t action_dim, DTd3Config config, Rng& rng);

  std::string_view name() const override { return "dtd3"; }
  std::unique_ptr<ActorCriticAgent> clone() const override;
  std::size_t batch_size() const override { return config_.batch_size; }
  std::size_t policy_frequency() const override { return config_.policy_freq; }
  ExplorationConfig exploration() const override;

  CriticStep compute_critic_step(replay::Batch batch, Rng& rng) const override;

  std::vector<const nn::Mlp*> critics() const override { return {&critic_}; }
  std::vector<const nn::Mlp*> target_critics() const override { return {&target_critic_}; }

  GaussianReturn evaluate(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;
  GaussianReturn evaluate_target(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;

  /// Clipped distributional Bellman targets for fixed draws z'.
  static Eigen::VectorXd bellman_targets(const Eigen::VectorXd& scaled_rewards,
                                         const Eigen::VectorXd& terminals, const Eigen::VectorXd& z_next,
                                         const Eigen::VectorXd& q, double gamma, double g);

  const DTd3Config& config() const { return config_; }

 protected:
  void apply_critic_grads(const std::vector<nn::Gradients>& grads) override;
  void soft_update_critics(double tau) override;
  double tau() const override { return config_.tau; }
  double actor_lr() const override { return config_.actor_lr; }
  const nn::Mlp& policy_critic() const override { return critic_; }
  void write_critics(std::ostream& os) const override;
  void read_critics(std::istream& is) override;

 private:
  DTd3Config config_;
  nn::Mlp critic_;
  nn::Mlp target_critic_;
  nn::Adam critic_opt_;
};

}  // namespace slicebench::agent
