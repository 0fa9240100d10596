// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "pulse/error.hpp"

namespace pulse {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& w : s_) w = splitmix64(x);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t x = seed ^ (stream_id * 0xD1B54A32D192ED03ULL);
  const std::uint64_t mixed = splitmix64(x);
  Rng r(mixed);
  r.seed_ = seed;
  return r;
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw NumericError("uniform_int(0)");
  // Rejection on the top of the range removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::beta(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw NumericError(fmt::format("beta({}, {}): parameters must be positive", alpha, beta));
  }
  // Johnk: X = U^(1/a), Y = V^(1/b), accept when X + Y <= 1, return X / (X + Y).
  // Logs keep small shape parameters (a, b << 1) away from underflow.
  for (;;) {
    const double log_x = std::log(uniform_open()) / alpha;
    const double log_y = std::log(uniform_open()) / beta;
    const double hi = std::max(log_x, log_y);
    const double log_sum = hi + std::log(std::exp(log_x - hi) + std::exp(log_y - hi));
    if (log_sum <= 0.0) {
      double v = std::exp(log_x - log_sum);
      constexpr double lo_clamp = std::numeric_limits<double>::min();
      const double hi_clamp = std::nextafter(1.0, 0.0);
      return std::clamp(v, lo_clamp, hi_clamp);
    }
  }
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

double sample_beta(Rng& rng, double alpha, double beta) { return rng.beta(alpha, beta); }

}  // namespace pulse
