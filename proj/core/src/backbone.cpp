// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/backbone.hpp"

#include <fmt/format.h>

#include "pulse/error.hpp"
#include "pulse/ops.hpp"

namespace pulse {

void Backbone::check_input(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(1) != lookback_) {
    throw ShapeError(fmt::format("backbone expects [B, {}, C], got {}", lookback_, shape_str(x.shape())));
  }
}

MlpBackbone::MlpBackbone(std::size_t lookback, std::size_t horizon, std::size_t hidden_width, double dropout, Rng& rng)
    : Backbone(lookback, horizon),
      hidden(Linear::create(lookback, hidden_width, rng)),
      output(Linear::create(hidden_width, horizon, rng)),
      dropout_rate(dropout) {}

Tensor MlpBackbone::forward(const Tensor& x_tilde, bool training, Rng& dropout_rng) const {
  check_input(x_tilde);
  const Tensor per_channel = permute(x_tilde, {0, 2, 1});  // B x C x T
  Tensor h = gelu(hidden(per_channel));
  h = dropout(h, dropout_rate, dropout_rng, training);
  return permute(output(h), {0, 2, 1});
}

void MlpBackbone::collect(const std::string& prefix, ParamList& out) const {
  hidden.collect(prefix + ".hidden", out);
  output.collect(prefix + ".output", out);
}

LinearBackbone::LinearBackbone(std::size_t lookback, std::size_t horizon, Rng& rng)
    : Backbone(lookback, horizon), map(Linear::create(lookback, horizon, rng)) {}

Tensor LinearBackbone::forward(const Tensor& x_tilde, bool, Rng&) const {
  check_input(x_tilde);
  return permute(map(permute(x_tilde, {0, 2, 1})), {0, 2, 1});
}

void LinearBackbone::collect(const std::string& prefix, ParamList& out) const { map.collect(prefix + ".map", out); }

std::unique_ptr<Backbone> make_backbone(std::string_view kind, std::size_t lookback, std::size_t horizon,
                                        std::size_t hidden, double dropout, Rng& rng) {
  if (kind == "mlp") return std::make_unique<MlpBackbone>(lookback, horizon, hidden, dropout, rng);
  if (kind == "linear") return std::make_unique<LinearBackbone>(lookback, horizon, rng);
  throw ConfigError(fmt::format("unknown backbone '{}' (expected mlp or linear)", kind));
}

}  // namespace pulse
