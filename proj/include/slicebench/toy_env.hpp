#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "slicebench/environment.hpp"
#include "slicebench/rng.hpp"

namespace slicebench {

/// Two-state MDP with a scalar action a in [-1, 1].
///   r(s, a)            = base[s] - curvature * (a - target[s])^2
///   P(s' = 1 | s, a)   = (1 + a) / 2
/// Observations are one-hot. Episodes end only by the step limit.
struct ToyMdpParams {
  std::array<double, 2> base{0.0, 1.0};
  std::array<double, 2> target{0.5, -0.5};
  double curvature = 0.4;
  std::size_t episode_length = 50;

  double reward(int state, double action) const;
  double prob_next_one(double action) const;
};

class ToyMdp final : public Environment {
 public:
  static constexpr std::string_view kId = "toy-two-state-v0";

  explicit ToyMdp(ToyMdpParams params = {}) : params_(params) {}

  std::string_view id() const override { return kId; }
  std::vector<double> reset(std::uint64_t seed) override;
  StepOutcome step(std::span<const double> action) override;
  BoxSpec observation_spec() const override { return {{0.0, 0.0}, {1.0, 1.0}}; }
  BoxSpec action_spec() const override { return {{-1.0}, {1.0}}; }
  std::size_t episode_length() const override { return params_.episode_length; }

  const ToyMdpParams& params() const { return params_; }
  int current_state() const { return state_; }

  static std::vector<double> encode(int state);

 private:
  ToyMdpParams params_;
  Rng rng_;
  int state_ = 0;
  std::size_t steps_ = 0;
};

}  // namespace slicebench
