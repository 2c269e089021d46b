#pragma once

// Independent reference implementations used to check the library.
// Nothing here calls into the code under test except for reading network
// parameters and MDP constants.

#include <complex>
#include <cstddef>
#include <functional>
#include <vector>

#include "slicebench/nn.hpp"
#include "slicebench/toy_env.hpp"

namespace oracle {

using cd = std::complex<double>;
/// Row-major dense complex matrix.
using CMat = std::vector<std::vector<cd>>;

/// Gauss-Jordan inversion with partial pivoting.
CMat invert(CMat a);

/// Column m of the result is sqrt(p_m) A^-1 h_m / |A^-1 h_m| with
/// A = I + (1/sigma_hat2) sum_j h_j h_j^H; h is N x M.
CMat rzf(const CMat& h, double sigma_hat2, const std::vector<double>& powers);

/// SINR by explicit double summation over users.
std::vector<double> sinr(const CMat& h, const CMat& v, double sigma2);

double rate(double sinr, double snr_gap);

/// Loop-based evaluation of every layer of `net`.
std::vector<double> mlp_forward(const slicebench::nn::Mlp& net, const std::vector<double>& x);

double gelu(double x);

/// (f(x + h) - f(x - h)) / 2h evaluated by perturbing `param` in place.
double central_difference(const std::function<double()>& f, double& param, double h = 1e-5);

/// Optimal values of the discounted two-state toy MDP by value iteration
/// over a uniform grid of actions in [-1, 1].
struct ToyValues {
  double v[2] = {0.0, 0.0};
  double best_action[2] = {0.0, 0.0};
  std::size_t iterations = 0;
};
ToyValues toy_value_iteration(const slicebench::ToyMdpParams& p, double gamma, std::size_t grid = 2001,
                              double tol = 1e-12);

/// Optimal Q(s, a) given the optimal state values.
double toy_q(const slicebench::ToyMdpParams& p, const ToyValues& v, double gamma, int s, double a);

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Upper-tail probability of the chi-square distribution.
double chi_square_sf(double statistic, double dof);

}  // namespace oracle
