#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "slicebench/rng.hpp"

namespace slicebench::channel {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Placement of N single-antenna access points and M single-antenna users
/// inside a square area, plus the log-distance large-scale gain model.
struct Topology {
  std::size_t n_aps = 1;
  std::size_t n_users = 1;
  double area_side = 100.0;          // meters
  std::vector<Point> ap_positions;
  std::vector<Point> user_positions;
  double pathloss_exponent = 3.5;
  double reference_gain = 1e-3;      // gain at the 1 m reference distance

  /// Throws ConfigError when counts, positions or exponents are invalid.
  void validate() const;

  /// Uniform random placement of APs and users.
  static Topology random(std::size_t n_aps, std::size_t n_users, double area_side,
                         double pathloss_exponent, double reference_gain, Rng& rng);
};

/// Column m holds the channel vector h_m from all N APs to user m.
struct ChannelMatrix {
  ComplexMatrix gains;

  std::size_t n_aps() const { return static_cast<std::size_t>(gains.rows()); }
  std::size_t n_users() const { return static_cast<std::size_t>(gains.cols()); }
};

/// Column m is v_m with squared norm equal to powers[m].
struct BeamformingMatrix {
  ComplexMatrix vectors;
  Eigen::VectorXd powers;
};

struct RadioParams {
  double regularizer_noise = 1e-9;  // regularization noise variance (W)
  double receiver_noise = 1e-9;     // receiver noise variance (W)
  double snr_gap = 1.0;             // modulation SNR gap, >= 1

  void validate() const;
  bool operator==(const RadioParams&) const = default;
};

/// Reference distance below which pathloss is not extrapolated.
inline constexpr double kMinDistance = 1.0;

/// beta[n, m] = reference_gain * max(d, 1 m)^-exponent.
Eigen::MatrixXd large_scale_gains(const Topology& topology);

/// Rayleigh fading on top of the large-scale gains of `topology`.
ChannelMatrix generate_channel(const Topology& topology, Rng& rng);

/// Same as above with precomputed large-scale gains (N x M).
ChannelMatrix generate_channel(const Eigen::MatrixXd& large_scale, Rng& rng);

/// Regularized zero-forcing:
///   v_m = sqrt(p_m) * A^-1 h_m / |A^-1 h_m|,  A = I + (1/sigma_hat^2) sum_j h_j h_j^H.
/// A is Hermitian positive-definite with eigenvalues >= 1, so a Cholesky solve
/// always succeeds. Throws DegenerateChannel for an all-zero channel column.
BeamformingMatrix rzf_beamformer(const ChannelMatrix& h, const RadioParams& params,
                                 std::span<const double> powers);

/// Per-user SINR: |h_m^H v_m|^2 / (sum_{j != m} |h_m^H v_j|^2 + sigma^2).
Eigen::VectorXd sinr(const ChannelMatrix& h, const BeamformingMatrix& v,
                     const RadioParams& params);

/// Per-user achievable rate log2(1 + SINR / snr_gap), bits/s/Hz.
Eigen::VectorXd achievable_rate(const Eigen::VectorXd& sinr, const RadioParams& params);

}  // namespace slicebench::channel
