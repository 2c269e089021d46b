#include <doctest.h>

#include <cmath>
#include <random>

#include "slicebench/costs.hpp"
#include "slicebench/errors.hpp"

using namespace slicebench;
using namespace slicebench::costs;

namespace {

ComputeParams compute(double theta, double cb, double delta, double core = 4.0, std::size_t u = 2) {
  ComputeParams p;
  p.theta_hat = theta;
  p.c_b = cb;
  p.delta = delta;
  p.core_capacity = core;
  p.cores_per_vnf = u;
  p.total_cpu = 100.0;
  return p;
}

}  // namespace

TEST_CASE("baseband compute") {
  const auto p = compute(2.0, 1.0, 1.0);
  Eigen::VectorXd r(2);
  r << 0.0, 2.3219;
  const auto c = baseband_compute(r, p);
  CHECK(c(0) == 1.0);
  CHECK(c(1) == doctest::Approx(5.6438));
  const auto c2 = baseband_compute(r, compute(4.0, 1.0, 1.0));
  CHECK(c2(1) - 1.0 == doctest::Approx(2.0 * (c(1) - 1.0)));
}

TEST_CASE("transmission compute counts active entries") {
  const auto p1 = compute(1.0, 1.0, 1.0);
  CHECK(transmission_compute(channel::ComplexVector::Zero(5), p1) == 0.0);
  CHECK(transmission_compute(channel::ComplexVector::Constant(150, {0.3, 0.1}), p1) == 150.0);
  channel::ComplexVector half = channel::ComplexVector::Constant(10, 1.0);
  for (int i = 0; i < 5; ++i) half(2 * i) = 0.0;
  CHECK(transmission_compute(half, compute(1.0, 1.0, 2.0)) == 10.0);
  channel::ComplexVector tiny = channel::ComplexVector::Constant(3, 1e-13);
  CHECK(active_entries(tiny) == 0);
}

TEST_CASE("network compute equals per-user summation") {
  const auto p = compute(1.5, 2.0, 0.5);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  channel::BeamformingMatrix v;
  v.vectors = channel::ComplexMatrix::Zero(4, 3);
  Eigen::VectorXd rates(3);
  std::size_t nnz_total = 0;
  for (int m = 0; m < 3; ++m) {
    rates(m) = u(rng);
    for (int n = 0; n <= m; ++n) {
      v.vectors(n, m) = {u(rng) + 0.1, 0.0};
      ++nnz_total;
    }
  }
  double expected = 0.0;
  for (int m = 0; m < 3; ++m) expected += 1.5 * rates(m);
  expected += 0.5 * static_cast<double>(nnz_total) + 3 * 2.0;
  CHECK(network_compute(rates, v, p) == doctest::Approx(expected).epsilon(1e-14));

  channel::BeamformingMatrix zero{channel::ComplexMatrix::Zero(4, 3), Eigen::VectorXd::Zero(3)};
  CHECK(network_compute(Eigen::VectorXd::Zero(3), zero, p) == 3 * 2.0);

  const auto frac = cpu_fractions(rates, v, p);
  CHECK(frac.sum() == doctest::Approx(network_compute(rates, v, p)).epsilon(1e-14));
}

TEST_CASE("core and vnf ceilings") {
  const auto p = compute(1.0, 1.0, 1.0, 4.0, 2);
  const std::vector<double> a{5.0, 5.5};
  CHECK(active_cores(a, p) == 3);
  CHECK(vnf_count(3, p) == 2);
  const std::vector<double> b{4.0, 4.0};
  CHECK(active_cores(b, p) == 2);
  CHECK(vnf_count(0, p) == 0);
}

TEST_CASE("ceiling chain holds on random inputs") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  std::uniform_real_distribution<double> cap(0.5, 30.0);
  std::uniform_int_distribution<std::size_t> users(0, 8), per(1, 6);
  for (int i = 0; i < 10000; ++i) {
    const auto p = compute(1.0, 1.0, 1.0, cap(rng), per(rng));
    std::vector<double> f(users(rng));
    double sum = 0.0;
    for (auto& x : f) sum += (x = u(rng));
    const auto xi = active_cores(f, p);
    const auto x = vnf_count(xi, p);
    REQUIRE(p.core_capacity * static_cast<double>(xi) >= sum);
    REQUIRE(p.cores_per_vnf * x >= xi);
    if (xi > 0) REQUIRE(p.core_capacity * static_cast<double>(xi - 1) < sum);
  }
}

TEST_CASE("processor energy") {
  EnergyParams e;
  e.iota = 1e-26;
  e.p_z = 1e9;
  e.psi = 2.0;
  CHECK(processor_energy(1, 0, e) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(processor_energy(0, 3, e) == 6.0);
  CHECK(processor_energy(2, 0, e) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("transmit energy equals beam powers") {
  channel::BeamformingMatrix v{channel::ComplexMatrix::Zero(1, 1), Eigen::VectorXd::Constant(1, 4.0)};
  v.vectors(0, 0) = 2.0;
  CHECK(transmit_energy(v) == doctest::Approx(4.0));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  channel::BeamformingMatrix w{channel::ComplexMatrix(4, 3), Eigen::VectorXd(3)};
  double sum = 0.0;
  for (int n = 0; n < 4; ++n)
    for (int m = 0; m < 3; ++m) {
      w.vectors(n, m) = {g(rng), g(rng)};
      sum += w.vectors(n, m).real() * w.vectors(n, m).real() + w.vectors(n, m).imag() * w.vectors(n, m).imag();
    }
  CHECK(std::abs(transmit_energy(w) - sum) < 1e-12 * sum);
}

TEST_CASE("network delay worked case") {
  DelayParams d;
  d.vnf_boot_delay = 5.0;
  d.arrival_rate = {1.0};
  d.service_rate = {2.0};
  d.tx_rate = {2.0};
  const bool booted[] = {true};
  const auto out = network_delay(d, 1, booted);
  CHECK(out.total == doctest::Approx(7.0));
  CHECK(out.per_user[0] == doctest::Approx(7.0));
  const bool not_booted[] = {false};
  CHECK(network_delay(d, 0, not_booted).per_user[0] == doctest::Approx(2.0));
}

TEST_CASE("unstable queue raises") {
  CHECK_THROWS_AS(queue_delay(1.0, 1.0), UnstableQueue);
  CHECK_THROWS_AS(queue_delay(1.0 + 1e-10, 1.0), UnstableQueue);
  CHECK(queue_delay(1.0 + 1e-6, 1.0) == doctest::Approx(1e6).epsilon(1e-6));
  DelayParams d;
  d.arrival_rate = {1.0, 1.0};
  d.service_rate = {2.0, 0.5};
  d.tx_rate = {2.0, 2.0};
  const bool booted[] = {false, false};
  CHECK_THROWS_AS(network_delay(d, 0, booted), UnstableQueue);
}

TEST_CASE("network delay equals term-by-term sum and is monotone") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  DelayParams d;
  d.vnf_boot_delay = 3.0;
  double expected = 2 * 3.0;
  for (int m = 0; m < 3; ++m) {
    const double phi = u(rng);
    d.arrival_rate.push_back(phi);
    d.service_rate.push_back(phi + u(rng));
    d.tx_rate.push_back(phi + u(rng));
    expected += 1.0 / (d.service_rate.back() - phi) + 1.0 / (d.tx_rate.back() - phi);
  }
  const bool booted[] = {true, false, false};
  const auto out = network_delay(d, 2, booted);
  CHECK(std::abs(out.total - expected) < 1e-12 * expected);

  auto faster = d;
  faster.service_rate[0] += 0.5;
  CHECK(network_delay(faster, 2, booted).total < out.total);
  auto busier = d;
  busier.arrival_rate[1] += 0.05;
  CHECK(network_delay(busier, 2, booted).total > out.total);
}

TEST_CASE("objective") {
  ObjectiveWeights w;
  CHECK(objective(10.0, 10.0, 10.0, w, 4) == doctest::Approx(10.0));
  CHECK(objective(10.0, 10.0, 10.0, w, 8) == doctest::Approx(5.0));
  CHECK(objective(20.0, 20.0, 20.0, w, 4) == doctest::Approx(20.0));
  CHECK(w.w1 == 1.0);
  CHECK(w.w2 == 2.0);
  CHECK(w.w3 == 1.0);
  CHECK(w.w4 == 100.0);
}
