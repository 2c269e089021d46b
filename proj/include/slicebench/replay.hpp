#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "slicebench/rng.hpp"

namespace slicebench::replay {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  /// True only for genuine terminal states; step-limit endings stay false.
  bool terminal = false;
};

/// Identifies a stored transition; generation detects overwritten slots.
struct SampleIndex {
  std::size_t shard = 0;
  std::size_t slot = 0;
  std::uint64_t generation = 0;
};

/// Column-per-sample batch.
struct Batch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd next_states;
  Eigen::VectorXd rewards;
  Eigen::VectorXd terminals;  // 1.0 for terminal transitions
  Eigen::VectorXd weights;    // importance-sampling weights, max 1
  std::vector<SampleIndex> indices;

  std::size_t size() const { return indices.size(); }
};

inline constexpr double kPriorityFloor = 1e-6;

/// Binary sum tree with a parallel min tree over leaf values.
class SumTree {
 public:
  explicit SumTree(std::size_t capacity = 1);

  std::size_t capacity() const { return capacity_; }
  void set(std::size_t leaf, double value);
  double get(std::size_t leaf) const { return sum_[base_ + leaf]; }
  double total() const { return sum_[1]; }
  /// Minimum over leaves that were ever set; +inf when none.
  double min() const { return min_[1]; }
  /// Leaf whose cumulative interval contains mass in [0, total()).
  std::size_t find(double mass) const;

 private:
  std::size_t capacity_;
  std::size_t base_;
  std::vector<double> sum_;
  std::vector<double> min_;
};

/// Common interface of the uniform, prioritized and sharded stores.
/// Every operation is linearizable.
class ReplayBuffer {
 public:
  virtual ~ReplayBuffer() = default;

  virtual void push(const Transition& t) = 0;
  /// Draws with replacement. Throws InsufficientData when size() < n.
  virtual Batch sample(std::size_t n, Rng& rng) = 0;
  virtual void update_priorities(std::span<const SampleIndex> indices,
                                 std::span<const double> losses) = 0;
  virtual void set_beta(double /*beta*/) {}

  virtual std::size_t size() const = 0;
  virtual std::size_t capacity() const = 0;
  virtual std::uint64_t pushed() const = 0;
  virtual std::uint64_t stale_updates() const = 0;
};

/// Ring storage shared by the concrete buffers; not synchronized itself.
class RingStorage {
 public:
  RingStorage(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  /// Returns the slot written.
  std::size_t write(const Transition& t);
  void gather(std::span<const std::size_t> slots, Batch& out) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t generation(std::size_t slot) const { return generation_[slot]; }
  std::uint64_t written() const { return written_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

 private:
  std::size_t capacity_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t next_ = 0;
  std::size_t size_ = 0;
  std::uint64_t written_ = 0;
  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> next_states_;
  std::vector<double> rewards_;
  std::vector<double> terminals_;
  std::vector<std::uint64_t> generation_;
};

class UniformBuffer final : public ReplayBuffer {
 public:
  UniformBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim);

  void push(const Transition& t) override;
  Batch sample(std::size_t n, Rng& rng) override;
  void update_priorities(std::span<const SampleIndex>, std::span<const double>) override {}

  std::size_t size() const override;
  std::size_t capacity() const override { return capacity_; }
  std::uint64_t pushed() const override;
  std::uint64_t stale_updates() const override { return 0; }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  RingStorage store_;
};

struct PrioritizedOptions {
  double alpha = 0.6;
  double beta = 0.4;
};

/// P(i) = p_i^alpha / sum_j p_j^alpha, weights (N P(i))^-beta / max_j (N P(j))^-beta.
class PrioritizedBuffer final : public ReplayBuffer {
 public:
  PrioritizedBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim,
                    PrioritizedOptions options = {});

  void push(const Transition& t) override;
  Batch sample(std::size_t n, Rng& rng) override;
  /// p_i = |loss_i| + 1e-6. Indices whose slot was overwritten are skipped and counted.
  void update_priorities(std::span<const SampleIndex> indices,
                         std::span<const double> losses) override;
  void set_beta(double beta) override;

  std::size_t size() const override;
  std::size_t capacity() const override { return capacity_; }
  std::uint64_t pushed() const override;
  std::uint64_t stale_updates() const override;

  double alpha() const { return alpha_; }
  double beta() const;
  double max_priority() const;
  double priority(std::size_t slot) const;
  /// Root of the sum tree, i.e. sum of p_i^alpha over live slots.
  double total_mass() const;

 private:
  std::size_t capacity_;
  double alpha_;
  double beta_;
  mutable std::mutex mu_;
  RingStorage store_;
  SumTree tree_;
  std::vector<double> priorities_;
  double max_priority_ = 1.0;
  std::uint64_t stale_ = 0;
};

enum class ShardPolicy { kRoundRobin, kRandom };

/// Several independent buffers; pushes are distributed by the policy and
/// each sample comes from one shard chosen uniformly among the non-empty
/// shards holding at least n transitions.
class ShardedReplay final : public ReplayBuffer {
 public:
  ShardedReplay(std::vector<std::unique_ptr<ReplayBuffer>> shards, ShardPolicy policy,
                std::uint64_t seed);

  void push(const Transition& t) override;
  Batch sample(std::size_t n, Rng& rng) override;
  void update_priorities(std::span<const SampleIndex> indices,
                         std::span<const double> losses) override;
  void set_beta(double beta) override;

  std::size_t size() const override;
  std::size_t capacity() const override;
  std::uint64_t pushed() const override;
  std::uint64_t stale_updates() const override;

  std::size_t shard_count() const { return shards_.size(); }
  const ReplayBuffer& shard(std::size_t i) const { return *shards_.at(i); }

 private:
  std::vector<std::unique_ptr<ReplayBuffer>> shards_;
  ShardPolicy policy_;
  std::mutex route_mu_;
  std::size_t next_ = 0;
  Rng route_rng_;
};

/// Linear anneal from beta0 at t = 0 to 1 at t = horizon.
double annealed_beta(double beta0, std::uint64_t t, std::uint64_t horizon);

}  // namespace slicebench::replay
