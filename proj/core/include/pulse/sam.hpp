// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "pulse/model.hpp"
#include "pulse/norm.hpp"
#include "pulse/ops.hpp"
#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

struct MixPlan {
  std::vector<double> lambdas;  // one entry per sample; all equal unless per-sample mixing
  std::vector<std::size_t> perm;
  bool enabled = false;
  bool statistic_aware = true;

  double lambda() const { return lambdas.empty() ? 1.0 : lambdas.front(); }
  std::size_t size() const { return perm.size(); }
};

/// Disabled plans carry lambda 1 and the identity permutation and draw nothing.
/// Otherwise the permutation is drawn first, then lambda ~ Beta(alpha, alpha).
MixPlan make_plan(Rng& rng, std::size_t batch_size, double alpha, const AblationFlags& flags,
                  bool per_sample = false, std::optional<double> force_lambda = std::nullopt);

/// lambda q + (1 - lambda) q[perm] along axis 0.
Tensor mix(const MixPlan& plan, const Tensor& q);

struct MixedBatch {
  Tensor x_tilde;
  Tensor anchor_x;
  Tensor enc_y;
  Tensor mu;
  Tensor sigma;
  Tensor y;
};

/// Mixes the normalized input, anchors, encodings, targets and the residual
/// statistics with one plan. The statistics are interpolated, never re-measured.
MixedBatch mix_batch(const MixPlan& plan, const Tensor& x_tilde, const Tensor& anchor_x, const Tensor& enc_y,
                     const NormState& state, const Tensor& y);

/// Statistics re-measured from the mixed residual waveform x_mix - anchor_mix.
MeanStd naive_mix_stats(const Tensor& x_mix, const Tensor& anchor_mix);

/// (sigma_naive / sigma_mixed)^2 for a residual pair with correlation rho.
double collapse_ratio(double sigma_i, double sigma_j, double rho, double lambda);

/// L2 norm of d z / d y for the latent z that decodes exactly to target y
/// under (mu, sigma, anchor); it equals sqrt(numel) / sigma for scalar sigma.
double latent_sensitivity(const Tensor& target, const Tensor& anchor_y, double mu, double sigma);

}  // namespace pulse
