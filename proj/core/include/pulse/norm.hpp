// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "pulse/layers.hpp"
#include "pulse/ops.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// Per-sample, per-channel residual statistics captured at normalization time.
struct NormState {
  Tensor mu;     // B x 1 x C
  Tensor sigma;  // B x 1 x C, >= sqrt(eps_var)
  double eps_var = kVarianceEps;
};

/// Optional learnable affine on the normalized residual (off by default).
struct RevinAffine {
  Tensor gamma;  // C
  Tensor beta;   // C

  static RevinAffine identity(std::size_t channels);
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Normalized {
  Tensor x_tilde;
  NormState state;
};

/// Residual-only normalization: R = X - A, X~ = (R - mu_R) / sigma_R + A.
Normalized disentangle_normalize(const Tensor& x, const Tensor& anchor, const RevinAffine* affine = nullptr);

/// Y^ = sigma_R (Y0 - A_y) + mu_R + A_y with the statistics of the matching forward pass.
Tensor generative_denorm(const Tensor& y0, const Tensor& anchor_y, const NormState& state,
                         const RevinAffine* affine = nullptr);

/// Same affine map with caller-supplied statistics (the mixup decode path).
Tensor denorm_with_stats(const Tensor& y0, const Tensor& anchor_y, const Tensor& mu, const Tensor& sigma,
                         const RevinAffine* affine = nullptr);

/// Plain instance normalization over axis 1 of [B, T, C] (no anchor).
Tensor instance_normalize(const Tensor& x);

}  // namespace pulse
