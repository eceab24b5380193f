// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace wsa {

// xoshiro256** seeded through splitmix64. The stream depends only on the seed,
// so toy models and synthetic data are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Standard normal via Box-Muller (no cached second value, keeps the stream simple).
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace wsa
