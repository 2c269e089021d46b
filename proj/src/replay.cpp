#include "slicebench/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "slicebench/errors.hpp"

namespace slicebench::replay {

namespace {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void check_sample_size(std::size_t have, std::size_t want) {
  if (want == 0) throw InsufficientData("batch size must be positive");
  if (have < want)
    throw InsufficientData("replay holds " + std::to_string(have) + " transitions, batch needs " +
                           std::to_string(want));
}

}  // namespace

SumTree::SumTree(std::size_t capacity)
    : capacity_(std::max<std::size_t>(capacity, 1)),
      base_(next_pow2(capacity_)),
      sum_(2 * base_, 0.0),
      min_(2 * base_, std::numeric_limits<double>::infinity()) {}

void SumTree::set(std::size_t leaf, double value) {
  if (leaf >= capacity_) throw ShapeMismatch("SumTree::set: leaf out of range");
  std::size_t i = base_ + leaf;
  sum_[i] = value;
  min_[i] = value;
  for (i >>= 1; i >= 1; i >>= 1) {
    sum_[i] = sum_[2 * i] + sum_[2 * i + 1];
    min_[i] = std::min(min_[2 * i], min_[2 * i + 1]);
  }
}

std::size_t SumTree::find(double mass) const {
  std::size_t i = 1;
  while (i < base_) {
    const double left = sum_[2 * i];
    if (mass < left || sum_[2 * i + 1] <= 0.0) {
      i = 2 * i;
    } else {
      mass -= left;
      i = 2 * i + 1;
    }
  }
  return std::min(i - base_, capacity_ - 1);
}

RingStorage::RingStorage(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim),
      generation_(capacity, 0) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
}

std::size_t RingStorage::write(const Transition& t) {
  if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ ||
      t.action.size() != action_dim_)
    throw ShapeMismatch("transition dimensions do not match the replay buffer");
  const std::size_t slot = next_;
  if (size_ < capacity_) {
    states_.insert(states_.end(), t.state.begin(), t.state.end());
    actions_.insert(actions_.end(), t.action.begin(), t.action.end());
    next_states_.insert(next_states_.end(), t.next_state.begin(), t.next_state.end());
    rewards_.push_back(t.reward);
    terminals_.push_back(t.terminal ? 1.0 : 0.0);
    ++size_;
  } else {
    std::copy(t.state.begin(), t.state.end(), states_.begin() + slot * state_dim_);
    std::copy(t.action.begin(), t.action.end(), actions_.begin() + slot * action_dim_);
    std::copy(t.next_state.begin(), t.next_state.end(), next_states_.begin() + slot * state_dim_);
    rewards_[slot] = t.reward;
    terminals_[slot] = t.terminal ? 1.0 : 0.0;
  }
  ++generation_[slot];
  ++written_;
  next_ = (next_ + 1) % capacity_;
  return slot;
}

void RingStorage::gather(std::span<const std::size_t> slots, Batch& out) const {
  const auto n = static_cast<Eigen::Index>(slots.size());
  const auto sd = static_cast<Eigen::Index>(state_dim_);
  const auto ad = static_cast<Eigen::Index>(action_dim_);
  out.states.resize(sd, n);
  out.next_states.resize(sd, n);
  out.actions.resize(ad, n);
  out.rewards.resize(n);
  out.terminals.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t s = slots[static_cast<std::size_t>(j)];
    out.states.col(j) = Eigen::Map<const Eigen::VectorXd>(states_.data() + s * state_dim_, sd);
    out.next_states.col(j) = Eigen::Map<const Eigen::VectorXd>(next_states_.data() + s * state_dim_, sd);
    out.actions.col(j) = Eigen::Map<const Eigen::VectorXd>(actions_.data() + s * action_dim_, ad);
    out.rewards(j) = rewards_[s];
    out.terminals(j) = terminals_[s];
  }
}

UniformBuffer::UniformBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
    : capacity_(capacity), store_(capacity, state_dim, action_dim) {}

void UniformBuffer::push(const Transition& t) {
  std::lock_guard lock(mu_);
  store_.write(t);
}

Batch UniformBuffer::sample(std::size_t n, Rng& rng) {
  std::lock_guard lock(mu_);
  check_sample_size(store_.size(), n);
  std::uniform_int_distribution<std::size_t> pick(0, store_.size() - 1);
  std::vector<std::size_t> slots(n);
  Batch b;
  b.indices.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    slots[i] = pick(rng);
    b.indices[i] = {0, slots[i], store_.generation(slots[i])};
  }
  store_.gather(slots, b);
  b.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  return b;
}

std::size_t UniformBuffer::size() const {
  std::lock_guard lock(mu_);
  return store_.size();
}

std::uint64_t UniformBuffer::pushed() const {
  std::lock_guard lock(mu_);
  return store_.written();
}

PrioritizedBuffer::PrioritizedBuffer(std::size_t capacity, std::size_t state_dim,
                                     std::size_t action_dim, PrioritizedOptions options)
    : capacity_(capacity), alpha_(options.alpha), beta_(options.beta),
      store_(capacity, state_dim, action_dim), tree_(capacity), priorities_(capacity, 0.0) {
  if (!(alpha_ >= 0.0)) throw ConfigError("priority exponent alpha must be >= 0");
  if (!(beta_ >= 0.0 && beta_ <= 1.0)) throw ConfigError("importance exponent beta must be in [0, 1]");
}

void PrioritizedBuffer::push(const Transition& t) {
  std::lock_guard lock(mu_);
  const double p = store_.size() == 0 ? 1.0 : max_priority_;
  const std::size_t slot = store_.write(t);
  priorities_[slot] = p;
  tree_.set(slot, std::pow(p, alpha_));
}

Batch PrioritizedBuffer::sample(std::size_t n, Rng& rng) {
  std::lock_guard lock(mu_);
  const std::size_t live = store_.size();
  check_sample_size(live, n);
  const double total = tree_.total();
  std::uniform_real_distribution<double> u(0.0, total);
  std::vector<std::size_t> slots(n);
  Batch b;
  b.indices.resize(n);
  b.weights.resize(static_cast<Eigen::Index>(n));
  const double n_live = static_cast<double>(live);
  const double max_weight = std::pow(n_live * tree_.min() / total, -beta_);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t slot = tree_.find(u(rng));
    while (slot >= live || tree_.get(slot) <= 0.0) slot = tree_.find(u(rng));
    slots[i] = slot;
    b.indices[i] = {0, slot, store_.generation(slot)};
    const double prob = tree_.get(slot) / total;
    b.weights(static_cast<Eigen::Index>(i)) = std::pow(n_live * prob, -beta_) / max_weight;
  }
  store_.gather(slots, b);
  return b;
}

void PrioritizedBuffer::update_priorities(std::span<const SampleIndex> indices,
                                          std::span<const double> losses) {
  if (indices.size() != losses.size())
    throw ShapeMismatch("update_priorities: index and loss counts differ");
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& idx = indices[i];
    if (idx.slot >= store_.size() || store_.generation(idx.slot) != idx.generation) {
      ++stale_;
      continue;
    }
    const double loss = losses[i];
    const double p = (std::isfinite(loss) ? std::abs(loss) : max_priority_) + kPriorityFloor;
    priorities_[idx.slot] = p;
    max_priority_ = std::max(max_priority_, p);
    tree_.set(idx.slot, std::pow(p, alpha_));
  }
}

void PrioritizedBuffer::set_beta(double beta) {
  std::lock_guard lock(mu_);
  beta_ = std::clamp(beta, 0.0, 1.0);
}

std::size_t PrioritizedBuffer::size() const {
  std::lock_guard lock(mu_);
  return store_.size();
}

std::uint64_t PrioritizedBuffer::pushed() const {
  std::lock_guard lock(mu_);
  return store_.written();
}

std::uint64_t PrioritizedBuffer::stale_updates() const {
  std::lock_guard lock(mu_);
  return stale_;
}

double PrioritizedBuffer::beta() const {
  std::lock_guard lock(mu_);
  return beta_;
}

double PrioritizedBuffer::max_priority() const {
  std::lock_guard lock(mu_);
  return max_priority_;
}

double PrioritizedBuffer::priority(std::size_t slot) const {
  std::lock_guard lock(mu_);
  return priorities_.at(slot);
}

double PrioritizedBuffer::total_mass() const {
  std::lock_guard lock(mu_);
  return tree_.total();
}

ShardedReplay::ShardedReplay(std::vector<std::unique_ptr<ReplayBuffer>> shards, ShardPolicy policy,
                             std::uint64_t seed)
    : shards_(std::move(shards)), policy_(policy), route_rng_(seed) {
  if (shards_.empty()) throw ConfigError("sharded replay needs at least one shard");
}

void ShardedReplay::push(const Transition& t) {
  std::size_t target = 0;
  {
    std::lock_guard lock(route_mu_);
    if (policy_ == ShardPolicy::kRoundRobin) {
      target = next_;
      next_ = (next_ + 1) % shards_.size();
    } else {
      target = std::uniform_int_distribution<std::size_t>(0, shards_.size() - 1)(route_rng_);
    }
  }
  shards_[target]->push(t);
}

Batch ShardedReplay::sample(std::size_t n, Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < shards_.size(); ++i)
    if (shards_[i]->size() >= n) eligible.push_back(i);
  if (eligible.empty()) check_sample_size(0, n == 0 ? 1 : n);
  const std::size_t pick =
      eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)];
  Batch b = shards_[pick]->sample(n, rng);
  for (auto& idx : b.indices) idx.shard = pick;
  return b;
}

void ShardedReplay::update_priorities(std::span<const SampleIndex> indices,
                                      std::span<const double> losses) {
  if (indices.size() != losses.size())
    throw ShapeMismatch("update_priorities: index and loss counts differ");
  std::vector<std::vector<SampleIndex>> idx(shards_.size());
  std::vector<std::vector<double>> val(shards_.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t s = indices[i].shard;
    if (s >= shards_.size()) throw ShapeMismatch("update_priorities: unknown shard");
    idx[s].push_back(indices[i]);
    val[s].push_back(losses[i]);
  }
  for (std::size_t s = 0; s < shards_.size(); ++s)
    if (!idx[s].empty()) shards_[s]->update_priorities(idx[s], val[s]);
}

void ShardedReplay::set_beta(double beta) {
  for (auto& s : shards_) s->set_beta(beta);
}

std::size_t ShardedReplay::size() const {
  std::size_t n = 0;
  for (const auto& s : shards_) n += s->size();
  return n;
}

std::size_t ShardedReplay::capacity() const {
  std::size_t n = 0;
  for (const auto& s : shards_) n += s->capacity();
  return n;
}

std::uint64_t ShardedReplay::pushed() const {
  std::uint64_t n = 0;
  for (const auto& s : shards_) n += s->pushed();
  return n;
}

std::uint64_t ShardedReplay::stale_updates() const {
  std::uint64_t n = 0;
  for (const auto& s : shards_) n += s->stale_updates();
  return n;
}

double annealed_beta(double beta0, std::uint64_t t, std::uint64_t horizon) {
  if (horizon == 0) return 1.0;
  const double frac = std::min(1.0, static_cast<double>(t) / static_cast<double>(horizon));
  return beta0 + (1.0 - beta0) * frac;
}

}  // namespace slicebench::replay
