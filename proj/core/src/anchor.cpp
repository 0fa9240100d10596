// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/anchor.hpp"

#include <fmt/format.h>

#include <cmath>

#include "pulse/error.hpp"
#include "pulse/ops.hpp"

namespace pulse {

namespace {

std::int64_t positive_mod(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

std::size_t phase_index(std::int64_t t_end, std::int64_t offset, std::size_t period, std::size_t codebook_size) {
  if (period == 0 || codebook_size == 0) throw NumericError("phase_index: period and codebook size must be >= 1");
  const auto phase = positive_mod(t_end, static_cast<std::int64_t>(period));
  return static_cast<std::size_t>(positive_mod(phase - offset, static_cast<std::int64_t>(codebook_size)));
}

Codebook Codebook::zeros(std::size_t size, std::size_t channels) {
  if (size == 0) throw ShapeError("codebook size must be >= 1");
  return {Tensor::zeros({size, channels}, true)};
}

TimeEncoder TimeEncoder::create(std::size_t features, std::size_t channels, std::size_t width, Rng& rng) {
  TimeEncoder enc;
  enc.mlp_in = Linear::create(features, width, rng);
  enc.mlp_out = Linear::create(width, width, rng);
  enc.conv_weight = uniform_param({3, width, width}, 1.0 / std::sqrt(3.0 * static_cast<double>(width)), rng);
  enc.conv_bias = Tensor::zeros({width}, true);
  enc.adapter = Linear::create(width, channels, rng);
  return enc;
}

void TimeEncoder::collect(const std::string& prefix, ParamList& out) const {
  mlp_in.collect(prefix + ".mlp_in", out);
  mlp_out.collect(prefix + ".mlp_out", out);
  out.push_back({prefix + ".conv.weight", conv_weight});
  out.push_back({prefix + ".conv.bias", conv_bias});
  adapter.collect(prefix + ".adapter", out);
}

Tensor time_encode(const TimeEncoder& encoder, const Tensor& marks) {
  if (marks.rank() != 2 && marks.rank() != 3) {
    throw ShapeError(fmt::format("time_encode: marks must be [len, F] or [B, len, F], got {}", shape_str(marks.shape())));
  }
  if (marks.shape().back() != encoder.features()) {
    throw ShapeError(fmt::format("time_encode: {} features, encoder expects {}", marks.shape().back(),
                                 encoder.features()));
  }
  const bool batched = marks.rank() == 3;
  const Tensor m = batched ? marks : reshape(marks, {1, marks.dim(0), marks.dim(1)});
  Tensor h = encoder.mlp_out(gelu(encoder.mlp_in(m)));
  h = conv1d_same(h, encoder.conv_weight, encoder.conv_bias);
  Tensor out = encoder.adapter(h);
  return batched ? out : reshape(out, {marks.dim(0), out.dim(2)});
}

Tensor history_codebook_rows(const Codebook& codebook, std::span<const std::size_t> t_end, std::size_t lookback,
                             std::size_t period) {
  std::vector<std::size_t> idx;
  idx.reserve(t_end.size() * lookback);
  for (auto te : t_end) {
    for (std::size_t h = 0; h < lookback; ++h) {
      idx.push_back(phase_index(static_cast<std::int64_t>(te), static_cast<std::int64_t>(lookback - 1 - h), period,
                                codebook.size()));
    }
  }
  return reshape(take(codebook.table, idx), {t_end.size(), lookback, codebook.channels()});
}

Tensor future_codebook_rows(const Codebook& codebook, std::span<const std::size_t> t_end, std::size_t horizon,
                            std::size_t period) {
  std::vector<std::size_t> idx;
  idx.reserve(t_end.size() * horizon);
  for (auto te : t_end) {
    for (std::size_t h = 0; h < horizon; ++h) {
      idx.push_back(((te + 1 + h) % period) % codebook.size());
    }
  }
  return reshape(take(codebook.table, idx), {t_end.size(), horizon, codebook.channels()});
}

Tensor build_history_anchor(const Codebook& codebook, const TimeEncoder& encoder, std::span<const std::size_t> t_end,
                            const Tensor& x_marks, std::size_t period) {
  if (x_marks.rank() != 3 || x_marks.dim(0) != t_end.size()) {
    throw ShapeError(fmt::format("build_history_anchor: marks {} for {} windows", shape_str(x_marks.shape()),
                                 t_end.size()));
  }
  return add(history_codebook_rows(codebook, t_end, x_marks.dim(1), period), time_encode(encoder, x_marks));
}

Tensor build_future_anchor_lookup(const Codebook& codebook, const TimeEncoder& encoder,
                                  std::span<const std::size_t> t_end, const Tensor& y_marks, std::size_t period) {
  if (y_marks.rank() != 3 || y_marks.dim(0) != t_end.size()) {
    throw ShapeError(fmt::format("build_future_anchor_lookup: marks {} for {} windows", shape_str(y_marks.shape()),
                                 t_end.size()));
  }
  return add(future_codebook_rows(codebook, t_end, y_marks.dim(1), period), time_encode(encoder, y_marks));
}

}  // namespace pulse
