#include "slicebench/toy_env.hpp"

#include <algorithm>

#include "slicebench/errors.hpp"

namespace slicebench {

double ToyMdpParams::reward(int state, double action) const {
  const double d = action - target[static_cast<std::size_t>(state)];
  return base[static_cast<std::size_t>(state)] - curvature * d * d;
}

double ToyMdpParams::prob_next_one(double action) const {
  return 0.5 * (1.0 + std::clamp(action, -1.0, 1.0));
}

std::vector<double> ToyMdp::encode(int state) {
  return state == 0 ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
}

std::vector<double> ToyMdp::reset(std::uint64_t seed) {
  rng_ = make_rng(seed, "toy");
  state_ = std::bernoulli_distribution(0.5)(rng_) ? 1 : 0;
  steps_ = 0;
  return encode(state_);
}

StepOutcome ToyMdp::step(std::span<const double> action) {
  if (action.size() != 1) throw ShapeMismatch("toy MDP action is one-dimensional");
  const double a = std::clamp(action[0], -1.0, 1.0);
  StepOutcome out;
  out.info.action_clipped = a != action[0];
  out.reward = params_.reward(state_, a);
  state_ = std::bernoulli_distribution(params_.prob_next_one(a))(rng_) ? 1 : 0;
  ++steps_;
  out.done = steps_ >= params_.episode_length;
  out.time_limit = out.done;
  out.observation = encode(state_);
  return out;
}

}  // namespace slicebench
