// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pulse/layers.hpp"
#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// Circular codebook row for the step `offset` positions before the window end:
/// ((t_end mod period) - offset) mod codebook_size, always in [0, codebook_size).
std::size_t phase_index(std::int64_t t_end, std::int64_t offset, std::size_t period, std::size_t codebook_size);

/// Learnable phase prototypes, one row of C values per phase slot.
struct Codebook {
  Tensor table;  // L x C

  /// Zero-initialized: training starts from plain residual normalization.
  static Codebook zeros(std::size_t size, std::size_t channels);
  std::size_t size() const { return table.dim(0); }
  std::size_t channels() const { return table.dim(1); }
};

/// Calendar-feature encoder: MLP (F -> d_t -> d_t), kernel-3 convolution over
/// time, then a linear adapter to the channel count.
struct TimeEncoder {
  Linear mlp_in;
  Linear mlp_out;
  Tensor conv_weight;  // 3 x d_t x d_t
  Tensor conv_bias;    // d_t
  Linear adapter;

  static TimeEncoder create(std::size_t features, std::size_t channels, std::size_t width, Rng& rng);
  void collect(const std::string& prefix, ParamList& out) const;
  std::size_t features() const { return mlp_in.in_features(); }
};

/// marks: [len, F] or [B, len, F]; returns [len, C] or [B, len, C].
Tensor time_encode(const TimeEncoder& encoder, const Tensor& marks);

/// Codebook rows for each look-back step; row h (oldest first) uses offset T-1-h.
Tensor history_codebook_rows(const Codebook& codebook, std::span<const std::size_t> t_end, std::size_t lookback,
                             std::size_t period);
/// Codebook rows for future steps; step h uses ((t_end + 1 + h) mod W) mod L.
Tensor future_codebook_rows(const Codebook& codebook, std::span<const std::size_t> t_end, std::size_t horizon,
                            std::size_t period);

/// A_x = M[idx] + TimeEncoder(x_marks), shape B x T x C.
Tensor build_history_anchor(const Codebook& codebook, const TimeEncoder& encoder, std::span<const std::size_t> t_end,
                            const Tensor& x_marks, std::size_t period);

/// Direct historical copying: codebook rows extended forward plus TimeEncoder(y_marks).
Tensor build_future_anchor_lookup(const Codebook& codebook, const TimeEncoder& encoder,
                                  std::span<const std::size_t> t_end, const Tensor& y_marks, std::size_t period);

}  // namespace pulse
