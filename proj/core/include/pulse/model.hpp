// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulse/anchor.hpp"
#include "pulse/backbone.hpp"
#include "pulse/data.hpp"
#include "pulse/layers.hpp"
#include "pulse/norm.hpp"
#include "pulse/rng.hpp"
#include "pulse/router.hpp"

namespace pulse {

/// Component switches; each one maps to one ablation row.
struct AblationFlags {
  bool use_anchor = true;
  bool use_router = true;
  bool use_sam = true;
  bool statistic_aware = true;

  bool operator==(const AblationFlags&) const = default;
};

struct ModelConfig {
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  std::size_t channels = 1;
  std::size_t mark_features = 0;
  std::size_t period = 24;         // global period W
  std::size_t codebook_size = 24;  // L
  std::size_t patch = 24;          // P
  std::size_t d_router = 32;
  std::size_t d_backbone = 512;
  std::size_t d_time = 16;
  double dropout = 0.1;
  std::string backbone = "mlp";
  bool swap_stage1 = false;
  bool affine = false;
  AblationFlags flags;

  /// Throws ConfigError on zero sizes or an out-of-range dropout rate.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class FutureAnchorMode { Routed, Lookup, Zero };

struct ForwardTrace {
  FutureAnchorMode mode = FutureAnchorMode::Zero;
  std::size_t token_builds = 0;
  std::size_t lookups = 0;
  std::size_t attention_rows = 0;
  std::size_t attention_cols = 0;
};

struct Forecast {
  Tensor y_hat;  // B x H x C
  Tensor a_x;    // B x T x C
  Tensor a_y;    // B x H x C
  Tensor y0;     // B x H x C
  NormState state;
  ForwardTrace trace;
};

/// Codebook, timestamp encoder, backbone and router under one configuration.
///
/// Every parameter exists regardless of the ablation flags; the flags only
/// select which of them take part in the forward pass.
class PulseModel {
 public:
  static PulseModel create(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  FutureAnchorMode future_mode() const;

  /// Fixed-order list: codebook, time_encoder.*, backbone.*, router.*, affine.*.
  ParamList parameters() const;
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  void zero_grad();

  /// A_x, or zeros without the anchor.
  Tensor history_anchor(const WindowBatch& batch) const;
  /// TimeEncoder(y_marks), or zeros without the anchor.
  Tensor future_encoding(const WindowBatch& batch) const;
  /// Codebook rows extended over the horizon (lookup mode only).
  Tensor future_rows(std::span<const std::size_t> t_end) const;
  Normalized normalize(const Tensor& x, const Tensor& anchor_x) const;
  Tensor latent(const Tensor& x_tilde, bool training, Rng& dropout_rng) const;
  /// A_y from (A_x, Y0, enc_y); `rows` is the (possibly mixed) lookup table in lookup mode.
  Tensor future_anchor(const Tensor& anchor_x, const Tensor& y0, const Tensor& enc_y, const Tensor& rows,
                       ForwardTrace* trace) const;
  Tensor decode(const Tensor& y0, const Tensor& anchor_y, const Tensor& mu, const Tensor& sigma) const;

  /// Evaluation-mode pass: no dropout, no mixup, statistics from this batch.
  Forecast predict(const WindowBatch& batch) const;

  const Codebook& codebook() const { return codebook_; }
  const TimeEncoder& encoder() const { return encoder_; }
  const Backbone& backbone() const { return *backbone_; }
  const PhaseRouter& router() const { return router_; }
  const RevinAffine* affine() const { return affine_ ? &*affine_ : nullptr; }

 private:
  ModelConfig cfg_;
  Codebook codebook_;
  TimeEncoder encoder_;
  std::unique_ptr<Backbone> backbone_;
  PhaseRouter router_;
  std::optional<RevinAffine> affine_;
};

/// Parameter-group prefix of a parameter name ("codebook", "time_encoder", ...).
std::string parameter_group(const std::string& name);

}  // namespace pulse
