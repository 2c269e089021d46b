#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace slicebench {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a root seed and a label.
/// FNV-1a over the label, mixed with the root through splitmix64.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

inline Rng make_rng(std::uint64_t root, std::string_view label) {
  return Rng(derive_seed(root, label));
}

}  // namespace slicebench
