#include "slicebench/environment.hpp"

#include <algorithm>

#include "slicebench/errors.hpp"

namespace slicebench {

namespace {

void check(std::span<const double> x, std::size_t n) {
  if (x.size() != n) throw ShapeMismatch("box dimension mismatch");
}

}  // namespace

bool BoxSpec::contains(std::span<const double> x) const {
  check(x, size());
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= low[i] && x[i] <= high[i])) return false;
  return true;
}

std::vector<double> BoxSpec::clip(std::span<const double> x) const {
  check(x, size());
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::clamp(x[i], low[i], high[i]);
  return out;
}

std::vector<double> BoxSpec::sample(Rng& rng) const {
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i)
    out[i] = std::uniform_real_distribution<double>(low[i], high[i])(rng);
  return out;
}

std::vector<double> BoxSpec::from_unit(std::span<const double> unit) const {
  check(unit, size());
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i)
    out[i] = low[i] + 0.5 * (std::clamp(unit[i], -1.0, 1.0) + 1.0) * (high[i] - low[i]);
  return out;
}

std::vector<double> BoxSpec::to_unit(std::span<const double> x) const {
  check(x, size());
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const double width = high[i] - low[i];
    out[i] = width > 0 ? std::clamp(2.0 * (x[i] - low[i]) / width - 1.0, -1.0, 1.0) : 0.0;
  }
  return out;
}

}  // namespace slicebench
