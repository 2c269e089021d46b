#include "slicebench/costs.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "slicebench/errors.hpp"

namespace slicebench::costs {

void ComputeParams::validate() const {
  if (!(theta_hat > 0 && c_b > 0 && delta > 0 && core_capacity > 0 && total_cpu > 0) ||
      cores_per_vnf < 1)
    throw ConfigError("compute parameters must all be positive");
}

void EnergyParams::validate() const {
  if (!(iota > 0 && p_z > 0)) throw ConfigError("iota and p_z must be positive");
  if (!(psi >= 0 && fronthaul_power >= 0 && circuit_power >= 0))
    throw ConfigError("psi and static AP powers must be non-negative");
}

void ObjectiveWeights::validate() const {
  if (!(w1 > 0 && w2 > 0 && w3 > 0 && w4 > 0)) throw ConfigError("objective weights must be positive");
}

Eigen::VectorXd baseband_compute(const Eigen::VectorXd& rates, const ComputeParams& p) {
  return (p.theta_hat * rates.array() + p.c_b).matrix();
}

std::size_t active_entries(const channel::ComplexVector& column) {
  std::size_t count = 0;
  for (Eigen::Index n = 0; n < column.size(); ++n)
    if (std::abs(column(n)) > kZeroTol) ++count;
  return count;
}

double transmission_compute(const channel::ComplexVector& column, const ComputeParams& p) {
  return p.delta * static_cast<double>(active_entries(column));
}

Eigen::VectorXd cpu_fractions(const Eigen::VectorXd& rates, const channel::BeamformingMatrix& v,
                              const ComputeParams& p) {
  if (rates.size() != v.vectors.cols())
    throw ShapeMismatch("cpu_fractions: rate count differs from beamformer columns");
  Eigen::VectorXd out(rates.size());
  for (Eigen::Index m = 0; m < rates.size(); ++m)
    out(m) = p.theta_hat * rates(m) + transmission_compute(v.vectors.col(m), p) + p.c_b;
  return out;
}

double network_compute(const Eigen::VectorXd& rates, const channel::BeamformingMatrix& v,
                       const ComputeParams& p) {
  if (rates.size() != v.vectors.cols())
    throw ShapeMismatch("network_compute: rate count differs from beamformer columns");
  double total = 0.0;
  for (Eigen::Index m = 0; m < rates.size(); ++m)
    total += p.theta_hat * rates(m) + transmission_compute(v.vectors.col(m), p);
  return total + static_cast<double>(rates.size()) * p.c_b;
}

std::size_t active_cores(std::span<const double> fractions, const ComputeParams& p) {
  const double sum = std::accumulate(fractions.begin(), fractions.end(), 0.0);
  if (sum <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(sum / p.core_capacity));
}

std::size_t vnf_count(std::size_t cores, const ComputeParams& p) {
  return (cores + p.cores_per_vnf - 1) / p.cores_per_vnf;
}

double processor_energy(std::size_t active_processors, std::size_t vnfs, const EnergyParams& p) {
  return static_cast<double>(active_processors) * p.iota * p.p_z * p.p_z * p.p_z +
         static_cast<double>(vnfs) * p.psi;
}

double transmit_energy(const channel::BeamformingMatrix& v) {
  return v.vectors.cwiseAbs2().sum();
}

double ap_static_energy(std::size_t n_aps, const EnergyParams& p) {
  return static_cast<double>(n_aps) * (p.fronthaul_power + p.circuit_power);
}

double queue_delay(double service_rate, double arrival_rate, std::size_t user) {
  const double gap = service_rate - arrival_rate;
  if (!(gap > kStabilityMargin))
    throw UnstableQueue(user, "unstable queue for user " + std::to_string(user) +
                                  ": service rate " + std::to_string(service_rate) +
                                  " <= arrival rate " + std::to_string(arrival_rate));
  return 1.0 / gap;
}

DelayBreakdown network_delay(const DelayParams& d, std::size_t new_vnfs,
                             std::span<const bool> booted) {
  const std::size_t m = d.arrival_rate.size();
  if (d.service_rate.size() != m || d.tx_rate.size() != m || booted.size() != m)
    throw ShapeMismatch("network_delay: per-user vectors differ in length");
  DelayBreakdown out;
  out.per_user.resize(m);
  out.total = static_cast<double>(new_vnfs) * d.vnf_boot_delay;
  for (std::size_t i = 0; i < m; ++i) {
    const double queues = queue_delay(d.service_rate[i], d.arrival_rate[i], i) +
                          queue_delay(d.tx_rate[i], d.arrival_rate[i], i);
    out.total += queues;
    out.per_user[i] = (booted[i] ? d.vnf_boot_delay : 0.0) + queues;
  }
  return out;
}

double objective(double compute, double energy, double delay, const ObjectiveWeights& w,
                 std::size_t active_users) {
  if (active_users < 1) throw DegenerateObjective("objective needs at least one active user");
  return (w.w1 * compute + w.w2 * energy + w.w3 * delay) / static_cast<double>(active_users);
}

}  // namespace slicebench::costs
