// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "pulse/layers.hpp"
#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// Residual-stream forecaster: maps X~ [B, T, C] to the latent Y0 [B, H, C].
///
/// Implementations are channel-independent and differentiable; dropout (if any)
/// draws from the supplied generator only when training.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual Tensor forward(const Tensor& x_tilde, bool training, Rng& dropout_rng) const = 0;
  virtual void collect(const std::string& prefix, ParamList& out) const = 0;
  virtual std::string_view kind() const = 0;

  std::size_t lookback() const { return lookback_; }
  std::size_t horizon() const { return horizon_; }

 protected:
  Backbone(std::size_t lookback, std::size_t horizon) : lookback_(lookback), horizon_(horizon) {}
  void check_input(const Tensor& x) const;

 private:
  std::size_t lookback_;
  std::size_t horizon_;
};

/// Shared per-channel MLP: T -> d_b, GELU, dropout, d_b -> H.
class MlpBackbone final : public Backbone {
 public:
  MlpBackbone(std::size_t lookback, std::size_t horizon, std::size_t hidden, double dropout, Rng& rng);

  Tensor forward(const Tensor& x_tilde, bool training, Rng& dropout_rng) const override;
  void collect(const std::string& prefix, ParamList& out) const override;
  std::string_view kind() const override { return "mlp"; }

  Linear hidden;
  Linear output;
  double dropout_rate;
};

/// Shared per-channel linear map T -> H.
class LinearBackbone final : public Backbone {
 public:
  LinearBackbone(std::size_t lookback, std::size_t horizon, Rng& rng);

  Tensor forward(const Tensor& x_tilde, bool training, Rng& dropout_rng) const override;
  void collect(const std::string& prefix, ParamList& out) const override;
  std::string_view kind() const override { return "linear"; }

  Linear map;
};

/// kind: "mlp" or "linear".
std::unique_ptr<Backbone> make_backbone(std::string_view kind, std::size_t lookback, std::size_t horizon,
                                        std::size_t hidden, double dropout, Rng& rng);

}  // namespace pulse
