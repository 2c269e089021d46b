#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slicebench/channel.hpp"
#include "slicebench/costs.hpp"
#include "slicebench/environment.hpp"
#include "slicebench/rng.hpp"

namespace slicebench::env {

struct SliceConfig {
  std::string name;
  double sinr_threshold = 1.0;   // linear
  double cpu_threshold = 1.0;    // MOPTS per user
  double delay_budget = 1.0;     // time slots
  double arrival_rate = 0.1;     // admission requests per step (Poisson)
  double packet_rate = 1.0;      // per-user packet arrivals per slot
  std::size_t max_users = 1;     // subscribers registered to the slice
  double initial_cpu = 0.0;      // MOPTS allocated at reset

  bool operator==(const SliceConfig&) const = default;
};

/// Per-violation penalties; must satisfy sinr > cpu > msr > delay > 0.
struct PenaltyCoeffs {
  double rho_sinr = 0.5;
  double rho_cpu = 0.3;
  double rho_msr = 0.1;
  double rho_delay = 0.05;

  void validate() const;
  bool operator==(const PenaltyCoeffs&) const = default;
};

struct EnvConfig {
  // Topology
  std::size_t n_aps = 16;
  std::size_t n_subscribers = 8;
  double area_side = 100.0;
  double pathloss_exponent = 3.5;
  double reference_gain = 1e-3;

  channel::RadioParams radio;
  double max_power = 1.0;        // per-slice beamforming power bound (W)

  costs::ComputeParams compute;
  costs::EnergyParams energy;

  double vnf_boot_delay = 20.0;
  double service_per_cpu = 0.1;  // packets/slot per MOPTS of slice allocation
  double tx_scale = 1.0;         // packets/slot per bit/s/Hz
  double tx_cap = 10.0;          // packets/slot
  double unstable_delay = 100.0; // delay charged to a user with an unstable queue

  double max_cpu_step = 30.0;    // per-step bound of each CPU scaling action (MOPTS)
  double mean_holding_time = 10.0;
  std::size_t episode_length = 50;

  std::vector<SliceConfig> slices;
  PenaltyCoeffs penalties;
  costs::ObjectiveWeights weights;

  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

/// Physical action: per-slice CPU scaling (MOPTS) and beam power (W).
struct Action {
  std::vector<double> cpu_delta;
  std::vector<double> power;
};

/// Raw per-slice features; `observation` is the normalized flattening
/// [arrivals | allocated CPU | delay | energy | served | VNFs], L entries each.
struct EnvState {
  std::vector<double> arrivals;
  std::vector<double> allocated_cpu;
  std::vector<double> delay;
  std::vector<double> energy;
  std::vector<std::size_t> served;
  std::vector<std::size_t> vnfs;
  std::vector<double> observation;
};

enum Violation : unsigned {
  kNone = 0,
  kSinr = 1u << 0,
  kCpu = 1u << 1,
  kMsr = 1u << 2,
  kDelay = 1u << 3,
};

struct UserMetrics {
  double sinr = 0.0;
  double cpu_fraction = 0.0;
  double tx_rate = 0.0;   // transmission queue service rate
  double rate = 0.0;      // achievable rate
  double qos_delay = 0.0;
  bool unstable = false;
};

/// Bitmask of violated constraints; zero means all four hold (non-strict).
unsigned constraint_indicator(const UserMetrics& user, const SliceConfig& slice);

/// sum_m eps_m with eps_m = -(largest coefficient among violated kinds).
double penalty(std::span<const unsigned> flags, const PenaltyCoeffs& rho);

struct RewardResult {
  double value = 0.0;
  bool clamped = false;
};

/// (1/objective + penalties)/w4 clamped to [-1, 1].
/// Throws DegenerateObjective when objective <= 1e-12.
RewardResult reward(double objective, double penalties, const costs::ObjectiveWeights& w);

struct AdmissionInput {
  std::vector<std::size_t> arrivals;
  std::vector<double> load;         // current CPU demand of served users
  std::vector<double> capacity;     // allocated CPU
  std::vector<std::size_t> served;
  std::vector<std::size_t> max_users;
  std::vector<double> projected_demand;  // CPU demand assumed for a newcomer
};

struct AdmissionResult {
  std::vector<std::size_t> admitted;
  std::vector<std::size_t> rejected;
  double rate = 1.0;
};

/// Processes the arrivals in random order; a request is admitted when its
/// slice is below its user cap and the projected demand fits the slice's
/// allocated CPU.
AdmissionResult admission_control(const AdmissionInput& in, Rng& rng);

/// Cell-free slicing network, id "smartech-v1".
class SliceEnv final : public Environment {
 public:
  static constexpr std::string_view kId = "smartech-v1";

  explicit SliceEnv(EnvConfig config);

  std::string_view id() const override { return kId; }
  std::vector<double> reset(std::uint64_t seed) override;
  /// Raw action in the action box: [cpu_delta x L | power x L].
  StepOutcome step(std::span<const double> action) override;
  StepOutcome step(const Action& action);
  BoxSpec observation_spec() const override;
  BoxSpec action_spec() const override;
  std::size_t episode_length() const override { return config_.episode_length; }

  const EnvConfig& config() const { return config_; }
  const EnvState& state() const { return state_; }
  const channel::Topology& topology() const { return topology_; }
  std::size_t steps() const { return step_count_; }

  /// CPU demand assumed for a newly admitted user of slice l.
  double projected_demand(std::size_t slice) const;

 private:
  struct Subscriber {
    std::size_t slice = 0;
    bool served = false;
    double cpu_demand = 0.0;
  };

  void apply_cpu_action(std::span<const double> cpu_delta);
  void refresh_observation();

  EnvConfig config_;
  channel::Topology topology_;
  Eigen::MatrixXd large_scale_;
  channel::ChannelMatrix channel_;
  std::vector<Subscriber> subscribers_;
  std::vector<std::size_t> prev_vnfs_;
  EnvState state_;
  std::size_t step_count_ = 0;
  bool needs_reset_ = true;

  Rng fading_rng_;
  Rng traffic_rng_;
  Rng admission_rng_;

  std::vector<double> arrival_norm_;
  std::vector<double> energy_norm_;
  std::vector<double> vnf_norm_;
};

}  // namespace slicebench::env
