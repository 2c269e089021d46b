#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "slicebench/rng.hpp"

namespace slicebench {

/// Axis-aligned box of valid values.
struct BoxSpec {
  std::vector<double> low;
  std::vector<double> high;

  std::size_t size() const { return low.size(); }
  bool contains(std::span<const double> x) const;
  std::vector<double> clip(std::span<const double> x) const;
  std::vector<double> sample(Rng& rng) const;

  /// Maps [-1, 1]^n onto the box (agents act in the normalized cube).
  std::vector<double> from_unit(std::span<const double> unit) const;
  std::vector<double> to_unit(std::span<const double> x) const;
};

struct SliceMetrics {
  double admission_rate = 1.0;
  double latency = 0.0;          // mean per-user QoS delay
  double cpu_utilization = 0.0;  // demanded / allocated CPU
  double energy = 0.0;           // W attributed to the slice
  std::size_t served = 0;
  std::size_t violations = 0;
};

struct StepInfo {
  double objective = 0.0;
  double compute = 0.0;
  double energy = 0.0;
  double delay = 0.0;
  double admission_rate = 1.0;
  std::size_t arrivals = 0;
  std::size_t admitted = 0;
  std::size_t served = 0;
  std::vector<SliceMetrics> slices;
  std::size_t sinr_violations = 0;
  std::size_t cpu_violations = 0;
  std::size_t msr_violations = 0;
  std::size_t delay_violations = 0;
  std::size_t unstable_users = 0;
  bool action_clipped = false;
  bool reward_clamped = false;
};

struct StepOutcome {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
  /// The episode ended by its step limit rather than a terminal state;
  /// learners keep bootstrapping through such transitions.
  bool time_limit = false;
  StepInfo info;
};

/// Episodic reset/step interface shared by the slicing network and the toy MDP.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view id() const = 0;
  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(std::span<const double> action) = 0;
  virtual BoxSpec observation_spec() const = 0;
  virtual BoxSpec action_spec() const = 0;
  virtual std::size_t episode_length() const = 0;
};

}  // namespace slicebench
