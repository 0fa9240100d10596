// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace pulse {

/// xoshiro256** seeded through splitmix64.
///
/// Both algorithms are fixed, published integer recurrences, so a given seed
/// yields the same stream on every platform. Floating-point draws are derived
/// from the top 53 bits of each 64-bit output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 2024);

  /// Independent generator for a named purpose (shuffle, dropout, ...).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on (0, 1); never returns 0.
  double uniform_open();
  /// Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Box-Muller (one fresh pair per call, second value discarded).
  double normal();
  /// Beta(alpha, beta) via Johnk's rejection algorithm, evaluated in log space.
  double beta(double alpha, double beta);
  /// Fisher-Yates shuffled permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

/// Free-function form of Rng::beta; exact Beta sample in (0, 1).
double sample_beta(Rng& rng, double alpha, double beta);

}  // namespace pulse
