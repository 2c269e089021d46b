#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "slicebench/channel.hpp"

namespace slicebench::costs {

/// Compute-model constants. Units: MOPTS (million operations per time slot).
struct ComputeParams {
  double theta_hat = 1.0;        // MOPTS per bit/s/Hz of rate
  double c_b = 1.0;              // constant baseband (FFT) load per user
  double delta = 1.0;            // load per active AP entry of a beamformer
  double core_capacity = 1.0;    // MOPTS per CPU core
  std::size_t cores_per_vnf = 1;
  double total_cpu = 1.0;        // MOPTS available in the shared pool

  void validate() const;
  bool operator==(const ComputeParams&) const = default;
};

struct EnergyParams {
  double iota = 1e-26;           // processor-structure constant
  double p_z = 1e9;              // per-processor capability
  double psi = 0.0;              // static power per VNF (W)
  double fronthaul_power = 0.0;  // per AP (W), neglected by default
  double circuit_power = 0.0;    // per AP (W), neglected by default

  void validate() const;
  bool operator==(const EnergyParams&) const = default;
};

/// Queueing inputs for the served users: per-user packet arrival rate,
/// processing service rate and transmission service rate (packets/slot).
struct DelayParams {
  double vnf_boot_delay = 0.0;
  std::vector<double> arrival_rate;
  std::vector<double> service_rate;
  std::vector<double> tx_rate;
};

struct NetworkCosts {
  double compute = 0.0;   // C_Net
  double energy = 0.0;    // E_Net
  double delay = 0.0;     // D_Net
  std::vector<double> per_user_qos;
  std::vector<double> cpu_fractions;
  std::size_t active_cores = 0;
  std::size_t vnf_count = 0;
  double objective = 0.0;
};

struct ObjectiveWeights {
  double w1 = 1.0;
  double w2 = 2.0;
  double w3 = 1.0;
  double w4 = 100.0;

  void validate() const;
  bool operator==(const ObjectiveWeights&) const = default;
};

/// Entries with magnitude at or below this are treated as inactive APs.
inline constexpr double kZeroTol = 1e-12;

/// Margin by which a service rate must exceed the arrival rate.
inline constexpr double kStabilityMargin = 1e-9;

/// theta_hat * R_m + C_B for every user.
Eigen::VectorXd baseband_compute(const Eigen::VectorXd& rates, const ComputeParams& p);

/// Number of entries with |v_n| > kZeroTol.
std::size_t active_entries(const channel::ComplexVector& column);

/// delta * active_entries(column).
double transmission_compute(const channel::ComplexVector& column, const ComputeParams& p);

/// sum_m [theta_hat R_m + delta nnz(v_m)] + M C_B.
double network_compute(const Eigen::VectorXd& rates, const channel::BeamformingMatrix& v,
                       const ComputeParams& p);

/// Per-user CPU demand Delta_m = theta_hat R_m + delta nnz(v_m) + C_B.
Eigen::VectorXd cpu_fractions(const Eigen::VectorXd& rates, const channel::BeamformingMatrix& v,
                              const ComputeParams& p);

/// ceil(sum Delta / core_capacity).
std::size_t active_cores(std::span<const double> fractions, const ComputeParams& p);

/// ceil(cores / cores_per_vnf).
std::size_t vnf_count(std::size_t cores, const ComputeParams& p);

/// Z iota P_z^3 + X psi (W).
double processor_energy(std::size_t active_processors, std::size_t vnfs, const EnergyParams& p);

/// sum_n sum_m |v_{n,m}|^2 (W); equals the sum of the beam powers.
double transmit_energy(const channel::BeamformingMatrix& v);

/// Fronthaul plus circuit power of all APs (zero with default params).
double ap_static_energy(std::size_t n_aps, const EnergyParams& p);

/// Mean M/M/1 sojourn 1/(service - arrival). Throws UnstableQueue (tagged
/// with `user`) when service - arrival <= kStabilityMargin.
double queue_delay(double service_rate, double arrival_rate, std::size_t user = 0);

struct DelayBreakdown {
  double total = 0.0;               // D_Net
  std::vector<double> per_user;     // cross-layer QoS term per user
};

/// D_Net = x D_X + sum_m [1/(mu_m - phi_m) + 1/(c_m - phi_m)].
/// `booted[m]` marks users whose slice instantiated a VNF this step; those
/// users carry the boot delay in their QoS term.
/// Throws UnstableQueue for the first unstable user.
DelayBreakdown network_delay(const DelayParams& d, std::size_t new_vnfs,
                             std::span<const bool> booted);

/// (w1 C + w2 E + w3 D) / m_t.
double objective(double compute, double energy, double delay, const ObjectiveWeights& w,
                 std::size_t active_users);

inline double objective(const NetworkCosts& c, const ObjectiveWeights& w,
                        std::size_t active_users) {
  return objective(c.compute, c.energy, c.delay, w, active_users);
}

}  // namespace slicebench::costs
