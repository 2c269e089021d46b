#include "slicebench/channel.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "slicebench/errors.hpp"

namespace slicebench::channel {

namespace {

constexpr double kDegenerateNorm = 1e-12;

bool inside(const Point& p, double side) {
  return p.x >= 0.0 && p.x <= side && p.y >= 0.0 && p.y <= side;
}

}  // namespace

void Topology::validate() const {
  if (n_aps < 1 || n_users < 1) throw ConfigError("topology needs at least one AP and one user");
  if (ap_positions.size() != n_aps || user_positions.size() != n_users)
    throw ConfigError("topology position count does not match AP/user counts");
  if (!(area_side > 0.0)) throw ConfigError("topology area_side must be positive");
  if (!(pathloss_exponent > 0.0)) throw ConfigError("pathloss_exponent must be positive");
  if (!(reference_gain > 0.0)) throw ConfigError("reference_gain must be positive");
  for (const auto& p : ap_positions)
    if (!inside(p, area_side)) throw ConfigError("AP position outside the area");
  for (const auto& p : user_positions)
    if (!inside(p, area_side)) throw ConfigError("user position outside the area");
}

Topology Topology::random(std::size_t n_aps, std::size_t n_users, double area_side,
                          double pathloss_exponent, double reference_gain, Rng& rng) {
  Topology t;
  t.n_aps = n_aps;
  t.n_users = n_users;
  t.area_side = area_side;
  t.pathloss_exponent = pathloss_exponent;
  t.reference_gain = reference_gain;
  std::uniform_real_distribution<double> coord(0.0, area_side);
  t.ap_positions.resize(n_aps);
  for (auto& p : t.ap_positions) p = {coord(rng), coord(rng)};
  t.user_positions.resize(n_users);
  for (auto& p : t.user_positions) p = {coord(rng), coord(rng)};
  t.validate();
  return t;
}

void RadioParams::validate() const {
  if (!(regularizer_noise > 0.0)) throw ConfigError("regularizer_noise must be positive");
  if (!(receiver_noise > 0.0)) throw ConfigError("receiver_noise must be positive");
  if (!(snr_gap >= 1.0)) throw ConfigError("snr_gap must be >= 1");
}

Eigen::MatrixXd large_scale_gains(const Topology& topology) {
  Eigen::MatrixXd beta(topology.n_aps, topology.n_users);
  for (std::size_t n = 0; n < topology.n_aps; ++n) {
    for (std::size_t m = 0; m < topology.n_users; ++m) {
      const double dx = topology.ap_positions[n].x - topology.user_positions[m].x;
      const double dy = topology.ap_positions[n].y - topology.user_positions[m].y;
      const double d = std::max(std::hypot(dx, dy), kMinDistance);
      beta(n, m) = topology.reference_gain * std::pow(d, -topology.pathloss_exponent);
    }
  }
  return beta;
}

ChannelMatrix generate_channel(const Topology& topology, Rng& rng) {
  return generate_channel(large_scale_gains(topology), rng);
}

ChannelMatrix generate_channel(const Eigen::MatrixXd& large_scale, Rng& rng) {
  // CN(0, 1): real and imaginary parts each N(0, 1/2).
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  ChannelMatrix h;
  h.gains.resize(large_scale.rows(), large_scale.cols());
  for (Eigen::Index m = 0; m < large_scale.cols(); ++m) {
    for (Eigen::Index n = 0; n < large_scale.rows(); ++n) {
      const double re = normal(rng);
      const double im = normal(rng);
      h.gains(n, m) = std::sqrt(large_scale(n, m)) * std::complex<double>(re, im);
    }
  }
  return h;
}

BeamformingMatrix rzf_beamformer(const ChannelMatrix& h, const RadioParams& params,
                                 std::span<const double> powers) {
  const auto n = h.gains.rows();
  const auto m = h.gains.cols();
  if (static_cast<Eigen::Index>(powers.size()) != m)
    throw ShapeMismatch("rzf_beamformer: power vector length " + std::to_string(powers.size()) +
                        " != user count " + std::to_string(m));

  ComplexMatrix a = ComplexMatrix::Identity(n, n);
  a.noalias() += (1.0 / params.regularizer_noise) * h.gains * h.gains.adjoint();
  const Eigen::LLT<ComplexMatrix> llt(a);
  const ComplexMatrix directions = llt.solve(h.gains);

  BeamformingMatrix v;
  v.vectors.resize(n, m);
  v.powers.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double p = powers[static_cast<std::size_t>(j)];
    if (!(p >= 0.0)) throw ShapeMismatch("rzf_beamformer: negative beamforming power");
    const double norm = directions.col(j).norm();
    if (norm < kDegenerateNorm)
      throw DegenerateChannel("rzf_beamformer: degenerate channel for user " + std::to_string(j));
    v.vectors.col(j) = (std::sqrt(p) / norm) * directions.col(j);
    v.powers(j) = p;
  }
  return v;
}

Eigen::VectorXd sinr(const ChannelMatrix& h, const BeamformingMatrix& v,
                     const RadioParams& params) {
  if (h.gains.rows() != v.vectors.rows() || h.gains.cols() != v.vectors.cols())
    throw ShapeMismatch("sinr: channel and beamformer dimensions differ");
  // g(m, j) = h_m^H v_j
  const ComplexMatrix g = h.gains.adjoint() * v.vectors;
  const Eigen::MatrixXd g2 = g.cwiseAbs2();
  Eigen::VectorXd out(g.rows());
  for (Eigen::Index m = 0; m < g.rows(); ++m) {
    double interference = 0.0;
    for (Eigen::Index j = 0; j < g.cols(); ++j)
      if (j != m) interference += g2(m, j);
    out(m) = g2(m, m) / (interference + params.receiver_noise);
  }
  return out;
}

Eigen::VectorXd achievable_rate(const Eigen::VectorXd& sinr, const RadioParams& params) {
  return (1.0 + sinr.array() / params.snr_gap).log() / std::log(2.0);
}

}  // namespace slicebench::channel
