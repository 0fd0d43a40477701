#pragma once

#include <cstdint>
#include <random>

namespace gradspec {

/// The one generator used across the toolkit; every source and test takes an
/// explicit seed so runs are reproducible bit for bit.
using Rng = std::mt19937_64;

/// Seed for slice `index` along an axis: root ^ (axis_tag << 32) ^ index.
inline std::uint64_t slice_seed(std::uint64_t root, std::uint64_t axis_tag, std::uint64_t index) {
  return root ^ (axis_tag << 32) ^ index;
}

}  // namespace gradspec
