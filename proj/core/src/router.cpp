// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/router.hpp"

#include <fmt/format.h>

#include <cmath>

#include "pulse/error.hpp"
#include "pulse/ops.hpp"

namespace pulse {

AttentionBlock AttentionBlock::create(std::size_t width, Rng& rng) {
  AttentionBlock b;
  b.query = Linear::create(width, width, rng);
  b.key = Linear::create(width, width, rng);
  b.value = Linear::create(width, width, rng);
  return b;
}

void AttentionBlock::collect(const std::string& prefix, ParamList& out) const {
  query.collect(prefix + ".query", out);
  key.collect(prefix + ".key", out);
  value.collect(prefix + ".value", out);
}

Tensor cross_attention(const Tensor& queries, const Tensor& context, const AttentionBlock& block) {
  if (queries.rank() == 2 && context.rank() == 2) {
    const Tensor q3 = reshape(queries, {1, queries.dim(0), queries.dim(1)});
    const Tensor c3 = reshape(context, {1, context.dim(0), context.dim(1)});
    const Tensor out = cross_attention(q3, c3, block);
    return reshape(out, {out.dim(1), out.dim(2)});
  }
  if (queries.rank() != 3 || context.rank() != 3 || queries.dim(0) != context.dim(0) ||
      queries.dim(2) != context.dim(2)) {
    throw ShapeError(fmt::format("cross_attention: queries {} vs context {}", shape_str(queries.shape()),
                                 shape_str(context.shape())));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(block.query.out_features()));
  const Tensor q = block.query(queries);
  const Tensor k = block.key(context);
  const Tensor v = block.value(context);
  const Tensor weights = softmax(mul_scalar(bmm(q, permute(k, {0, 2, 1})), scale));
  return bmm(weights, v);
}

std::size_t patch_count(std::size_t length, std::size_t patch) {
  if (patch == 0) throw ShapeError("patch length must be >= 1");
  return (length + patch - 1) / patch;
}

Tensor tokenize(const Tensor& seq, std::size_t patch, const Linear& proj) {
  if (seq.rank() != 3 || seq.dim(1) == 0) {
    throw ShapeError(fmt::format("tokenize: expected [B, Len, C] with Len >= 1, got {}", shape_str(seq.shape())));
  }
  const std::size_t batch = seq.dim(0), len = seq.dim(1), channels = seq.dim(2);
  const std::size_t n = patch_count(len, patch);
  if (proj.in_features() != n) {
    throw ShapeError(fmt::format("tokenize: {} patches but projection takes {}", n, proj.in_features()));
  }
  Tensor per_channel = permute(seq, {0, 2, 1});  // B x C x Len
  per_channel = pad_front(per_channel, 2, n * patch - len);
  const Tensor grid = reshape(per_channel, {batch * channels, n, patch});
  return proj(permute(grid, {0, 2, 1}));  // (B*C) x P x d
}

RouterOpCount count_router_ops(std::size_t patch, std::size_t width, std::size_t lookback, std::size_t horizon) {
  const std::uint64_t p = patch, d = width;
  const std::uint64_t nx = patch_count(lookback, patch), ny = patch_count(horizon, patch);
  RouterOpCount c;
  c.projection = p * nx * d + p * ny * d;  // tokenization
  c.projection += 2 * 3 * p * d * d;       // Q/K/V maps of both stages
  c.projection += p * d * d + p * d * ny;  // output MLP
  // Per stage: Q K^T (P*P*d), softmax (P*P), weights times V (P*P*d).
  c.attention = 2 * (2 * p * p * d + p * p);
  return c;
}

PhaseRouter PhaseRouter::create(std::size_t lookback, std::size_t horizon, std::size_t patch, std::size_t width,
                                bool swap_stage1, Rng& rng) {
  PhaseRouter r;
  r.lookback = lookback;
  r.horizon = horizon;
  r.patch = patch;
  r.width = width;
  r.swap_stage1 = swap_stage1;
  r.proj_x = Linear::create(patch_count(lookback, patch), width, rng);
  r.proj_y = Linear::create(patch_count(horizon, patch), width, rng);
  r.stage1 = AttentionBlock::create(width, rng);
  r.stage2 = AttentionBlock::create(width, rng);
  r.out_hidden = Linear::create(width, width, rng);
  r.out_proj = Linear::create(width, patch_count(horizon, patch), rng);
  return r;
}

PhaseRouter PhaseRouter::zeros(std::size_t lookback, std::size_t horizon, std::size_t patch, std::size_t width) {
  PhaseRouter r;
  r.lookback = lookback;
  r.horizon = horizon;
  r.patch = patch;
  r.width = width;
  r.proj_x = Linear::zeros(patch_count(lookback, patch), width);
  r.proj_y = Linear::zeros(patch_count(horizon, patch), width);
  r.stage1 = {Linear::zeros(width, width), Linear::zeros(width, width), Linear::zeros(width, width)};
  r.stage2 = {Linear::zeros(width, width), Linear::zeros(width, width), Linear::zeros(width, width)};
  r.out_hidden = Linear::zeros(width, width);
  r.out_proj = Linear::zeros(width, patch_count(horizon, patch));
  return r;
}

Tensor PhaseRouter::route(const Tensor& anchor_x, const Tensor& latent_y, const Tensor& enc_y,
                          RouterTrace* trace) const {
  if (anchor_x.rank() != 3 || latent_y.rank() != 3 || anchor_x.dim(0) != latent_y.dim(0) ||
      anchor_x.dim(2) != latent_y.dim(2) || anchor_x.dim(1) != lookback || latent_y.dim(1) != horizon ||
      enc_y.shape() != latent_y.shape()) {
    throw ShapeError(fmt::format("route: anchor {}, latent {}, encoding {} (router T={}, H={})",
                                 shape_str(anchor_x.shape()), shape_str(latent_y.shape()), shape_str(enc_y.shape()),
                                 lookback, horizon));
  }
  const std::size_t batch = latent_y.dim(0), channels = latent_y.dim(2);
  const Tensor tokens_x = tokenize(anchor_x, patch, proj_x);
  const Tensor tokens_y = tokenize(latent_y, patch, proj_y);
  const Tensor z = swap_stage1 ? cross_attention(tokens_y, tokens_x, stage1) : cross_attention(tokens_x, tokens_y, stage1);
  const Tensor e = cross_attention(tokens_y, z, stage2);
  if (trace != nullptr) {
    trace->token_builds += 2;
    trace->attention_rows = tokens_x.dim(1);
    trace->attention_cols = tokens_y.dim(1);
  }
  const Tensor decoded = out_proj(gelu(out_hidden(e)));  // (B*C) x P x N_y
  const std::size_t ny = decoded.dim(2);
  Tensor flat = reshape(permute(decoded, {0, 2, 1}), {batch * channels, ny * patch});
  flat = slice(flat, 1, ny * patch - horizon, horizon);
  const Tensor routed = permute(reshape(flat, {batch, channels, horizon}), {0, 2, 1});
  return add(routed, enc_y);
}

RouterOpCount PhaseRouter::count_ops(std::size_t t, std::size_t h) const { return count_router_ops(patch, width, t, h); }

void PhaseRouter::collect(const std::string& prefix, ParamList& out) const {
  proj_x.collect(prefix + ".proj_x", out);
  proj_y.collect(prefix + ".proj_y", out);
  stage1.collect(prefix + ".stage1", out);
  stage2.collect(prefix + ".stage2", out);
  out_hidden.collect(prefix + ".out_hidden", out);
  out_proj.collect(prefix + ".out_proj", out);
}

}  // namespace pulse
