#include "slicebench/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "slicebench/errors.hpp"

namespace slicebench::env {

namespace {

constexpr double kObjectiveFloor = 1e-12;
constexpr double kCapacitySlack = 1e-9;

}  // namespace

void PenaltyCoeffs::validate() const {
  if (!(rho_sinr > rho_cpu && rho_cpu > rho_msr && rho_msr > rho_delay && rho_delay > 0.0))
    throw ConfigError("penalties must satisfy rho_sinr > rho_cpu > rho_msr > rho_delay > 0");
}

void EnvConfig::validate() const {
  if (n_aps < 1 || n_subscribers < 1) throw ConfigError("env needs at least one AP and subscriber");
  if (!(area_side > 0 && pathloss_exponent > 0 && reference_gain > 0))
    throw ConfigError("area_side, pathloss_exponent and reference_gain must be positive");
  radio.validate();
  compute.validate();
  energy.validate();
  weights.validate();
  penalties.validate();
  if (!(max_power > 0)) throw ConfigError("max_power must be positive");
  if (!(vnf_boot_delay >= 0)) throw ConfigError("vnf_boot_delay must be non-negative");
  if (!(service_per_cpu > 0 && tx_scale > 0 && tx_cap > 0))
    throw ConfigError("service_per_cpu, tx_scale and tx_cap must be positive");
  if (!(unstable_delay > 0)) throw ConfigError("unstable_delay must be positive");
  if (!(max_cpu_step > 0)) throw ConfigError("max_cpu_step must be positive");
  if (!(mean_holding_time >= 1.0)) throw ConfigError("mean_holding_time must be >= 1");
  if (episode_length < 1) throw ConfigError("episode_length must be >= 1");
  if (slices.empty()) throw ConfigError("at least one slice is required");
  std::size_t users = 0;
  double cpu = 0.0;
  for (const auto& s : slices) {
    if (!(s.sinr_threshold > 0 && s.cpu_threshold > 0 && s.delay_budget > 0))
      throw ConfigError("slice '" + s.name + "': thresholds must be positive");
    if (!(s.arrival_rate >= 0)) throw ConfigError("slice '" + s.name + "': negative arrival rate");
    if (!(s.packet_rate > 0)) throw ConfigError("slice '" + s.name + "': packet_rate must be positive");
    if (s.max_users < 1) throw ConfigError("slice '" + s.name + "': max_users must be >= 1");
    if (!(s.initial_cpu >= 0)) throw ConfigError("slice '" + s.name + "': negative initial_cpu");
    users += s.max_users;
    cpu += s.initial_cpu;
  }
  if (users > n_subscribers) throw ConfigError("sum of slice max_users exceeds n_subscribers");
  if (cpu > compute.total_cpu) throw ConfigError("initial CPU allocations exceed total_cpu");
}

unsigned constraint_indicator(const UserMetrics& user, const SliceConfig& slice) {
  unsigned flags = kNone;
  if (!(user.sinr >= slice.sinr_threshold)) flags |= kSinr;
  if (!(user.cpu_fraction <= slice.cpu_threshold)) flags |= kCpu;
  if (!(user.tx_rate <= user.rate)) flags |= kMsr;
  if (user.unstable || !(user.qos_delay <= slice.delay_budget)) flags |= kDelay;
  return flags;
}

double penalty(std::span<const unsigned> flags, const PenaltyCoeffs& rho) {
  double total = 0.0;
  for (unsigned f : flags) {
    if (f & kSinr) total -= rho.rho_sinr;
    else if (f & kCpu) total -= rho.rho_cpu;
    else if (f & kMsr) total -= rho.rho_msr;
    else if (f & kDelay) total -= rho.rho_delay;
  }
  return total;
}

RewardResult reward(double objective, double penalties, const costs::ObjectiveWeights& w) {
  if (!(objective > kObjectiveFloor))
    throw DegenerateObjective("reward: objective " + std::to_string(objective) + " is not positive");
  const double raw = (1.0 / objective + penalties) / w.w4;
  RewardResult r;
  r.value = std::clamp(raw, -1.0, 1.0);
  r.clamped = r.value != raw;
  return r;
}

AdmissionResult admission_control(const AdmissionInput& in, Rng& rng) {
  const std::size_t l = in.arrivals.size();
  if (in.load.size() != l || in.capacity.size() != l || in.served.size() != l ||
      in.max_users.size() != l || in.projected_demand.size() != l)
    throw ShapeMismatch("admission_control: per-slice vectors differ in length");

  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < l; ++s) order.insert(order.end(), in.arrivals[s], s);
  std::shuffle(order.begin(), order.end(), rng);

  AdmissionResult out;
  out.admitted.assign(l, 0);
  out.rejected.assign(l, 0);
  std::vector<double> load = in.load;
  std::vector<std::size_t> served = in.served;
  for (std::size_t s : order) {
    const bool room = served[s] < in.max_users[s];
    const bool cpu = load[s] + in.projected_demand[s] <= in.capacity[s] + kCapacitySlack;
    if (room && cpu) {
      ++out.admitted[s];
      ++served[s];
      load[s] += in.projected_demand[s];
    } else {
      ++out.rejected[s];
    }
  }
  const auto total = static_cast<double>(order.size());
  const auto admitted = std::accumulate(out.admitted.begin(), out.admitted.end(), std::size_t{0});
  out.rate = order.empty() ? 1.0 : static_cast<double>(admitted) / total;
  return out;
}

SliceEnv::SliceEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t l = config_.slices.size();
  const auto& cp = config_.compute;
  const auto& ep = config_.energy;
  // Demand of a user at a very high SINR (40 dB) bounds a slice's VNF footprint.
  const double peak_demand = cp.theta_hat * std::log2(1.0 + 1e4 / config_.radio.snr_gap) +
                             cp.delta * static_cast<double>(config_.n_aps) + cp.c_b;
  for (const auto& s : config_.slices) {
    arrival_norm_.push_back(s.arrival_rate + 4.0 * std::sqrt(s.arrival_rate) + 1.0);
    const std::vector<double> peak(s.max_users, peak_demand);
    const double vnfs = std::max<double>(
        1.0, static_cast<double>(costs::vnf_count(costs::active_cores(peak, cp), cp)));
    vnf_norm_.push_back(vnfs);
    energy_norm_.push_back(costs::processor_energy(static_cast<std::size_t>(vnfs),
                                                   static_cast<std::size_t>(vnfs), ep) +
                           static_cast<double>(s.max_users) * config_.max_power);
  }
  state_.arrivals.assign(l, 0.0);
  state_.allocated_cpu.assign(l, 0.0);
  state_.delay.assign(l, 0.0);
  state_.energy.assign(l, 0.0);
  state_.served.assign(l, 0);
  state_.vnfs.assign(l, 0);
  refresh_observation();
}

double SliceEnv::projected_demand(std::size_t slice) const {
  const auto& cp = config_.compute;
  const double rate = std::log2(1.0 + config_.slices.at(slice).sinr_threshold / config_.radio.snr_gap);
  return cp.theta_hat * rate + cp.delta * static_cast<double>(config_.n_aps) + cp.c_b;
}

BoxSpec SliceEnv::observation_spec() const {
  const std::size_t n = 6 * config_.slices.size();
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
}

BoxSpec SliceEnv::action_spec() const {
  const std::size_t l = config_.slices.size();
  BoxSpec box;
  box.low.assign(l, -config_.max_cpu_step);
  box.high.assign(l, config_.max_cpu_step);
  box.low.insert(box.low.end(), l, 0.0);
  box.high.insert(box.high.end(), l, config_.max_power);
  return box;
}

std::vector<double> SliceEnv::reset(std::uint64_t seed) {
  Rng topology_rng = make_rng(seed, "topology");
  topology_ = channel::Topology::random(config_.n_aps, config_.n_subscribers, config_.area_side,
                                        config_.pathloss_exponent, config_.reference_gain,
                                        topology_rng);
  large_scale_ = channel::large_scale_gains(topology_);
  fading_rng_ = make_rng(seed, "fading");
  traffic_rng_ = make_rng(seed, "traffic");
  admission_rng_ = make_rng(seed, "admission");
  channel_ = channel::generate_channel(large_scale_, fading_rng_);

  const std::size_t l = config_.slices.size();
  subscribers_.clear();
  for (std::size_t s = 0; s < l; ++s)
    for (std::size_t k = 0; k < config_.slices[s].max_users; ++k)
      subscribers_.push_back({s, false, 0.0});

  for (std::size_t s = 0; s < l; ++s) {
    state_.arrivals[s] = 0.0;
    state_.allocated_cpu[s] = config_.slices[s].initial_cpu;
    state_.delay[s] = 0.0;
    state_.energy[s] = 0.0;
    state_.served[s] = 0;
    state_.vnfs[s] = costs::vnf_count(costs::active_cores({}, config_.compute), config_.compute);
  }
  prev_vnfs_ = state_.vnfs;
  step_count_ = 0;
  needs_reset_ = false;
  refresh_observation();
  return state_.observation;
}

void SliceEnv::apply_cpu_action(std::span<const double> cpu_delta) {
  auto& alloc = state_.allocated_cpu;
  const double total = config_.compute.total_cpu;
  // Scale-downs first, each bounded by the slice's own allocation.
  for (std::size_t s = 0; s < alloc.size(); ++s)
    if (cpu_delta[s] < 0) alloc[s] = std::max(0.0, alloc[s] + std::max(cpu_delta[s], -alloc[s]));
  // Scale-ups share the free pool; when they overrun it they shrink proportionally.
  const double free = std::max(0.0, total - std::accumulate(alloc.begin(), alloc.end(), 0.0));
  double requested = 0.0;
  for (double d : cpu_delta) requested += std::max(d, 0.0);
  const double scale = requested > free ? free / requested : 1.0;
  for (std::size_t s = 0; s < alloc.size(); ++s)
    if (cpu_delta[s] > 0) alloc[s] = std::min(total, alloc[s] + cpu_delta[s] * scale);
}

StepOutcome SliceEnv::step(std::span<const double> action) {
  const std::size_t l = config_.slices.size();
  if (action.size() != 2 * l)
    throw ShapeMismatch("action length " + std::to_string(action.size()) + " != " +
                        std::to_string(2 * l));
  Action a;
  a.cpu_delta.assign(action.begin(), action.begin() + static_cast<std::ptrdiff_t>(l));
  a.power.assign(action.begin() + static_cast<std::ptrdiff_t>(l), action.end());
  return step(a);
}

StepOutcome SliceEnv::step(const Action& action) {
  if (needs_reset_) throw Error("SliceEnv::step called before reset or after episode end");
  const std::size_t l = config_.slices.size();
  if (action.cpu_delta.size() != l || action.power.size() != l)
    throw ShapeMismatch("action must carry one CPU delta and one power per slice");

  StepOutcome out;
  StepInfo& info = out.info;
  std::vector<double> cpu_delta(l), power(l);
  for (std::size_t s = 0; s < l; ++s) {
    cpu_delta[s] = std::clamp(action.cpu_delta[s], -config_.max_cpu_step, config_.max_cpu_step);
    power[s] = std::clamp(action.power[s], 0.0, config_.max_power);
    if (cpu_delta[s] != action.cpu_delta[s] || power[s] != action.power[s]) info.action_clipped = true;
  }

  // (1) departures, then Poisson admission requests.
  std::bernoulli_distribution depart(1.0 / config_.mean_holding_time);
  for (auto& sub : subscribers_) {
    if (sub.served && depart(traffic_rng_)) {
      sub.served = false;
      sub.cpu_demand = 0.0;
    }
  }
  std::vector<std::size_t> arrivals(l, 0);
  for (std::size_t s = 0; s < l; ++s) {
    const double lambda = config_.slices[s].arrival_rate;
    if (lambda > 0) arrivals[s] = std::poisson_distribution<std::size_t>(lambda)(traffic_rng_);
  }

  // (2) vertical CPU scaling.
  apply_cpu_action(cpu_delta);

  // (3) admission control.
  AdmissionInput adm;
  adm.arrivals = arrivals;
  adm.load.assign(l, 0.0);
  adm.served.assign(l, 0);
  for (const auto& sub : subscribers_) {
    if (!sub.served) continue;
    adm.load[sub.slice] += sub.cpu_demand;
    ++adm.served[sub.slice];
  }
  adm.capacity = state_.allocated_cpu;
  for (std::size_t s = 0; s < l; ++s) {
    adm.max_users.push_back(config_.slices[s].max_users);
    adm.projected_demand.push_back(projected_demand(s));
  }
  const AdmissionResult admitted = admission_control(adm, admission_rng_);
  for (std::size_t s = 0; s < l; ++s) {
    std::vector<std::size_t> idle;
    for (std::size_t i = 0; i < subscribers_.size(); ++i)
      if (subscribers_[i].slice == s && !subscribers_[i].served) idle.push_back(i);
    std::shuffle(idle.begin(), idle.end(), admission_rng_);
    for (std::size_t k = 0; k < admitted.admitted[s] && k < idle.size(); ++k) {
      subscribers_[idle[k]].served = true;
      subscribers_[idle[k]].cpu_demand = adm.projected_demand[s];
    }
  }

  // (4) beamforming, SINR and rate for the served users.
  std::vector<std::size_t> served;
  for (std::size_t i = 0; i < subscribers_.size(); ++i)
    if (subscribers_[i].served) served.push_back(i);
  const std::size_t m = served.size();
  channel::ChannelMatrix h;
  h.gains.resize(static_cast<Eigen::Index>(config_.n_aps), static_cast<Eigen::Index>(m));
  std::vector<double> user_power(m);
  for (std::size_t k = 0; k < m; ++k) {
    h.gains.col(static_cast<Eigen::Index>(k)) = channel_.gains.col(static_cast<Eigen::Index>(served[k]));
    user_power[k] = power[subscribers_[served[k]].slice];
  }
  channel::BeamformingMatrix bf;
  Eigen::VectorXd sinr = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  Eigen::VectorXd rates = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
  if (m > 0) {
    bf = channel::rzf_beamformer(h, config_.radio, user_power);
    sinr = channel::sinr(h, bf, config_.radio);
    rates = channel::achievable_rate(sinr, config_.radio);
  } else {
    bf.vectors.resize(static_cast<Eigen::Index>(config_.n_aps), 0);
    bf.powers.resize(0);
  }

  // (5) compute, energy and delay costs.
  const Eigen::VectorXd demand = costs::cpu_fractions(rates, bf, config_.compute);
  std::vector<std::vector<double>> slice_demand(l);
  std::vector<std::size_t> slice_users(l, 0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t s = subscribers_[served[k]].slice;
    slice_demand[s].push_back(demand(static_cast<Eigen::Index>(k)));
    ++slice_users[s];
    subscribers_[served[k]].cpu_demand = demand(static_cast<Eigen::Index>(k));
  }
  std::vector<std::size_t> vnfs(l), booted_vnfs(l);
  std::size_t new_vnfs = 0;
  double processor = 0.0;
  std::vector<double> slice_energy(l, 0.0);
  for (std::size_t s = 0; s < l; ++s) {
    vnfs[s] = costs::vnf_count(costs::active_cores(slice_demand[s], config_.compute), config_.compute);
    booted_vnfs[s] = vnfs[s] > prev_vnfs_[s] ? vnfs[s] - prev_vnfs_[s] : 0;
    new_vnfs += booted_vnfs[s];
    slice_energy[s] = costs::processor_energy(vnfs[s], vnfs[s], config_.energy);
    processor += slice_energy[s];
  }
  for (std::size_t k = 0; k < m; ++k) slice_energy[subscribers_[served[k]].slice] += user_power[k];

  info.compute = costs::network_compute(rates, bf, config_.compute);
  info.energy = processor + costs::transmit_energy(bf) +
                costs::ap_static_energy(config_.n_aps, config_.energy);

  std::vector<UserMetrics> users(m);
  double delay = static_cast<double>(new_vnfs) * config_.vnf_boot_delay;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t s = subscribers_[served[k]].slice;
    const auto& sc = config_.slices[s];
    UserMetrics& u = users[k];
    u.sinr = sinr(static_cast<Eigen::Index>(k));
    u.rate = rates(static_cast<Eigen::Index>(k));
    u.cpu_fraction = demand(static_cast<Eigen::Index>(k));
    u.tx_rate = std::min(u.rate * config_.tx_scale, config_.tx_cap);
    const double service =
        config_.service_per_cpu * state_.allocated_cpu[s] / static_cast<double>(slice_users[s]);
    double queues = 0.0;
    try {
      queues = costs::queue_delay(service, sc.packet_rate, k) +
               costs::queue_delay(u.tx_rate, sc.packet_rate, k);
    } catch (const UnstableQueue&) {
      queues = config_.unstable_delay;
      u.unstable = true;
      ++info.unstable_users;
    }
    delay += queues;
    u.qos_delay = (booted_vnfs[s] > 0 ? config_.vnf_boot_delay : 0.0) + queues;
  }
  info.delay = delay;

  // (6) constraints, penalties and reward.
  std::vector<unsigned> flags(m);
  info.slices.assign(l, SliceMetrics{});
  std::vector<double> slice_delay(l, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t s = subscribers_[served[k]].slice;
    flags[k] = constraint_indicator(users[k], config_.slices[s]);
    if (flags[k] & kSinr) ++info.sinr_violations;
    if (flags[k] & kCpu) ++info.cpu_violations;
    if (flags[k] & kMsr) ++info.msr_violations;
    if (flags[k] & kDelay) ++info.delay_violations;
    if (flags[k] != kNone) ++info.slices[s].violations;
    slice_delay[s] += users[k].qos_delay;
  }
  const double pen = penalty(flags, config_.penalties);
  if (m > 0) {
    info.objective = costs::objective(info.compute, info.energy, info.delay, config_.weights, m);
    const RewardResult r = reward(info.objective, pen, config_.weights);
    out.reward = r.value;
    info.reward_clamped = r.clamped;
  } else {
    // No served user: the per-user objective is undefined and only penalties count.
    const double raw = pen / config_.weights.w4;
    out.reward = std::clamp(raw, -1.0, 1.0);
    info.reward_clamped = out.reward != raw;
  }

  std::size_t total_arrivals = 0, total_admitted = 0;
  for (std::size_t s = 0; s < l; ++s) {
    SliceMetrics& sm = info.slices[s];
    sm.admission_rate = arrivals[s] > 0 ? static_cast<double>(admitted.admitted[s]) /
                                              static_cast<double>(arrivals[s])
                                        : 1.0;
    sm.served = slice_users[s];
    sm.latency = slice_users[s] > 0 ? slice_delay[s] / static_cast<double>(slice_users[s]) : 0.0;
    const double used = std::accumulate(slice_demand[s].begin(), slice_demand[s].end(), 0.0);
    sm.cpu_utilization = state_.allocated_cpu[s] > 0 ? std::min(1.0, used / state_.allocated_cpu[s])
                                                     : (used > 0 ? 1.0 : 0.0);
    sm.energy = slice_energy[s];
    total_arrivals += arrivals[s];
    total_admitted += admitted.admitted[s];

    state_.arrivals[s] = static_cast<double>(arrivals[s]);
    state_.delay[s] = sm.latency;
    state_.energy[s] = slice_energy[s];
    state_.served[s] = slice_users[s];
    state_.vnfs[s] = vnfs[s];
  }
  info.arrivals = total_arrivals;
  info.admitted = total_admitted;
  info.served = m;
  info.admission_rate = admitted.rate;
  prev_vnfs_ = vnfs;

  // (7) next small-scale fading realization over the fixed topology.
  channel_ = channel::generate_channel(large_scale_, fading_rng_);

  ++step_count_;
  out.done = step_count_ >= config_.episode_length;
  out.time_limit = out.done;
  needs_reset_ = out.done;
  refresh_observation();
  out.observation = state_.observation;
  return out;
}

void SliceEnv::refresh_observation() {
  const std::size_t l = config_.slices.size();
  auto& obs = state_.observation;
  obs.assign(6 * l, 0.0);
  auto unit = [](double x) { return std::isfinite(x) ? std::clamp(x, 0.0, 1.0) : 1.0; };
  for (std::size_t s = 0; s < l; ++s) {
    const auto& sc = config_.slices[s];
    obs[0 * l + s] = unit(state_.arrivals[s] / arrival_norm_[s]);
    obs[1 * l + s] = unit(state_.allocated_cpu[s] / config_.compute.total_cpu);
    obs[2 * l + s] = unit(state_.delay[s] / (2.0 * sc.delay_budget));
    obs[3 * l + s] = unit(state_.energy[s] / energy_norm_[s]);
    obs[4 * l + s] = unit(static_cast<double>(state_.served[s]) / static_cast<double>(sc.max_users));
    obs[5 * l + s] = unit(static_cast<double>(state_.vnfs[s]) / vnf_norm_[s]);
  }
}

}  // namespace slicebench::env
