// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "pulse/layers.hpp"
#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// Single-head attention block: query/key/value maps d -> d.
struct AttentionBlock {
  Linear query;
  Linear key;
  Linear value;

  static AttentionBlock create(std::size_t width, Rng& rng);
  void collect(const std::string& prefix, ParamList& out) const;
};

/// softmax(Q K^T / sqrt(d)) V with Q from `queries` and K, V from `context`.
/// Accepts [P, d] or batched [S, P, d] inputs. No residual path, no normalization.
Tensor cross_attention(const Tensor& queries, const Tensor& context, const AttentionBlock& block);

/// Number of patches after front zero-padding `length` to a multiple of `patch`.
std::size_t patch_count(std::size_t length, std::size_t patch);

/// Phase tokens for each channel of seq [B, Len, C].
///
/// The sequence is front-padded to N*P, cut into N patches of length P, and the
/// (N, P) grid is transposed so that token p gathers position p of every patch.
/// `proj` maps the patch-count axis N -> d, giving exactly P tokens of width d
/// per channel regardless of Len. Output: [B*C, P, d].
Tensor tokenize(const Tensor& seq, std::size_t patch, const Linear& proj);

struct RouterOpCount {
  std::uint64_t projection = 0;  // token projections, Q/K/V maps, output MLP
  std::uint64_t attention = 0;   // score products, softmax, weighted sums
  std::uint64_t total() const { return projection + attention; }
};

/// Multiply-add count of one routing pass for a single channel.
RouterOpCount count_router_ops(std::size_t patch, std::size_t width, std::size_t lookback, std::size_t horizon);

struct RouterTrace {
  std::size_t token_builds = 0;
  std::size_t attention_rows = 0;
  std::size_t attention_cols = 0;
};

/// Generates the future anchor from the history anchor and the backbone latent.
class PhaseRouter {
 public:
  static PhaseRouter create(std::size_t lookback, std::size_t horizon, std::size_t patch, std::size_t width,
                            bool swap_stage1, Rng& rng);
  /// All weights and biases zero (A_y then equals the timestamp encoding).
  static PhaseRouter zeros(std::size_t lookback, std::size_t horizon, std::size_t patch, std::size_t width);

  /// A_y = unpatch(out_mlp(E)) + enc_y with E from the two attention stages.
  Tensor route(const Tensor& anchor_x, const Tensor& latent_y, const Tensor& enc_y, RouterTrace* trace = nullptr) const;

  RouterOpCount count_ops(std::size_t lookback, std::size_t horizon) const;
  void collect(const std::string& prefix, ParamList& out) const;

  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::size_t patch = 0;
  std::size_t width = 0;
  bool swap_stage1 = false;
  Linear proj_x;  // N_x -> d
  Linear proj_y;  // N_y -> d
  AttentionBlock stage1;
  AttentionBlock stage2;
  Linear out_hidden;  // d -> d
  Linear out_proj;    // d -> N_y
};

}  // namespace pulse
