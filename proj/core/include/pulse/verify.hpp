// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// One machine-readable verification outcome: `value` must lie in [lower, upper].
struct CheckRow {
  std::string suite;
  std::string check;
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool pass = false;
};

CheckRow make_check(std::string suite, std::string check, double value, double lower, double upper);
bool all_pass(std::span<const CheckRow> rows);
void write_check_csv(std::ostream& out, std::span<const CheckRow> rows, const std::string& header);

/// |a - n| / max(|a|, |n|, 1e-4).
double relative_error(double analytic, double numeric);

/// Tape gradients of <f(), w> (w a fixed random projection) against
/// fourth-order central differences with step h over every element of every
/// leaf. `f` must be deterministic across calls. Returns the maximum relative error.
double gradcheck(std::span<Tensor> leaves, const std::function<Tensor()>& f, std::uint64_t seed, double h = 1e-4);

/// Every differentiable primitive and composite, plus the end-to-end training
/// loss on the tiny configuration (B=2, T=24, H=12, C=2, P=6, d=4, d_b=16).
std::vector<CheckRow> run_gradcheck_suite(std::uint64_t seed, double tolerance = 1e-5);

struct Prop31Report {
  double sigma_anchor = 0.0;
  double sigma_residual = 0.0;
  std::size_t trials = 0;
  double median_std_norm = 0.0;   // ||d RevIN(A + R) / dR||_2
  double median_ours_norm = 0.0;  // ||d (RevIN(R) + A) / dR||_2
  double ratio = 0.0;             // median_ours_norm / median_std_norm
  double min_scaled_std = 0.0;    // min over trials of ||J_std|| * sigma(X)
  double max_scaled_std = 0.0;
  std::vector<CheckRow> rows;
};

/// Numeric Jacobians (central differences, h = 1e-6) and power-iteration
/// spectral norms (20 iterations) for a sinusoidal anchor of std sigma_anchor
/// plus a Gaussian residual of std sigma_residual orthogonal to it.
Prop31Report check_prop31(Rng& rng, std::size_t length, double sigma_anchor, double sigma_residual,
                          std::size_t trials);

struct MixCell {
  double sigma_i = 1.0;
  double sigma_j = 1.0;
  double rho = 0.0;
  double lambda = 0.5;
};

struct Thm32Cell {
  MixCell cell;
  double expected = 0.0;     // closed-form (sigma_naive / sigma_mixed)^2
  double measured = 0.0;     // Monte-Carlo mean
  double std_error = 0.0;
  double max_sigma_naive = 0.0;
  bool lower_bound_holds = false;
  bool pass = false;
};

/// Full grid rho x lambda x sigma pairs used by the default suite.
std::vector<MixCell> default_mix_grid();

/// Correlated Gaussian pairs R_j = rho R_i + sqrt(1 - rho^2) Z, each rescaled to
/// its target std; compares the measured collapse ratio to the closed form within
/// 3 standard errors (plus 1e-10). Cells with rho = -1 at lambda = sigma_j /
/// (sigma_i + sigma_j) also require sigma_naive < 1e-6.
std::vector<Thm32Cell> check_thm32(Rng& rng, std::span<const MixCell> grid, std::size_t signal_len,
                                   std::size_t trials);
std::vector<CheckRow> thm32_rows(std::span<const Thm32Cell> cells);

/// Beta(alpha, alpha) prior checks: symmetry of the mean, uniform variance, U-shape.
std::vector<CheckRow> check_beta(Rng& rng, std::size_t samples = 100000);

/// Router op counts: attention constant in T, total affine in T, attention ~ P^2.
std::vector<CheckRow> check_complexity(std::span<const std::size_t> patches, std::span<const std::size_t> lookbacks,
                                       std::size_t horizon = 96, std::size_t width = 32);

/// suite: prop31, thm32, gradcheck, beta, complexity or all.
std::vector<CheckRow> run_verify(const std::string& suite, std::uint64_t seed);

}  // namespace pulse
