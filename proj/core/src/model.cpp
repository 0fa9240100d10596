// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/model.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "pulse/error.hpp"
#include "pulse/ops.hpp"

namespace pulse {

namespace {

constexpr std::uint64_t kEncoderStream = 11;
constexpr std::uint64_t kBackboneStream = 12;
constexpr std::uint64_t kRouterStream = 13;

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(fmt::format("model.{} must be >= 1", name));
}

}  // namespace

void ModelConfig::validate() const {
  require_positive(lookback, "lookback");
  require_positive(horizon, "horizon");
  require_positive(channels, "channels");
  require_positive(period, "period");
  require_positive(codebook_size, "codebook_size");
  require_positive(patch, "patch");
  require_positive(d_router, "d_router");
  require_positive(d_backbone, "d_backbone");
  require_positive(d_time, "d_time");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError(fmt::format("model.dropout {} outside [0, 1)", dropout));
  if (backbone != "mlp" && backbone != "linear") {
    throw ConfigError(fmt::format("model.backbone '{}' (expected mlp or linear)", backbone));
  }
}

PulseModel PulseModel::create(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PulseModel m;
  m.cfg_ = cfg;
  m.codebook_ = Codebook::zeros(cfg.codebook_size, cfg.channels);
  Rng enc_rng = Rng::stream(seed, kEncoderStream);
  m.encoder_ = TimeEncoder::create(cfg.mark_features, cfg.channels, cfg.d_time, enc_rng);
  Rng bb_rng = Rng::stream(seed, kBackboneStream);
  m.backbone_ = make_backbone(cfg.backbone, cfg.lookback, cfg.horizon, cfg.d_backbone, cfg.dropout, bb_rng);
  Rng router_rng = Rng::stream(seed, kRouterStream);
  m.router_ = PhaseRouter::create(cfg.lookback, cfg.horizon, cfg.patch, cfg.d_router, cfg.swap_stage1, router_rng);
  if (cfg.affine) m.affine_ = RevinAffine::identity(cfg.channels);
  return m;
}

FutureAnchorMode PulseModel::future_mode() const {
  if (!cfg_.flags.use_anchor) return FutureAnchorMode::Zero;
  return cfg_.flags.use_router ? FutureAnchorMode::Routed : FutureAnchorMode::Lookup;
}

ParamList PulseModel::parameters() const {
  ParamList out;
  out.push_back({"codebook", codebook_.table});
  encoder_.collect("time_encoder", out);
  backbone_->collect("backbone", out);
  router_.collect("router", out);
  if (affine_) affine_->collect("affine", out);
  return out;
}

std::vector<std::vector<double>> PulseModel::snapshot() const {
  std::vector<std::vector<double>> values;
  for (const auto& p : parameters()) values.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return values;
}

void PulseModel::restore(const std::vector<std::vector<double>>& values) {
  ParamList params = parameters();
  if (values.size() != params.size()) {
    throw ShapeError(fmt::format("restore: {} tensors for {} parameters", values.size(), params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.values_mut();
    if (dst.size() != values[i].size()) {
      throw ShapeError(fmt::format("restore: '{}' has {} values, got {}", params[i].name, dst.size(), values[i].size()));
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void PulseModel::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

Tensor PulseModel::history_anchor(const WindowBatch& batch) const {
  if (!cfg_.flags.use_anchor) return Tensor::zeros(batch.x.shape());
  return build_history_anchor(codebook_, encoder_, batch.t_end, batch.x_marks, cfg_.period);
}

Tensor PulseModel::future_encoding(const WindowBatch& batch) const {
  if (!cfg_.flags.use_anchor) return Tensor::zeros(batch.y.shape());
  return time_encode(encoder_, batch.y_marks);
}

Tensor PulseModel::future_rows(std::span<const std::size_t> t_end) const {
  return future_codebook_rows(codebook_, t_end, cfg_.horizon, cfg_.period);
}

Normalized PulseModel::normalize(const Tensor& x, const Tensor& anchor_x) const {
  return disentangle_normalize(x, anchor_x, affine());
}

Tensor PulseModel::latent(const Tensor& x_tilde, bool training, Rng& dropout_rng) const {
  return backbone_->forward(x_tilde, training, dropout_rng);
}

Tensor PulseModel::future_anchor(const Tensor& anchor_x, const Tensor& y0, const Tensor& enc_y, const Tensor& rows,
                                 ForwardTrace* trace) const {
  const FutureAnchorMode mode = future_mode();
  if (trace != nullptr) trace->mode = mode;
  switch (mode) {
    case FutureAnchorMode::Zero:
      return Tensor::zeros(y0.shape());
    case FutureAnchorMode::Lookup:
      if (trace != nullptr) ++trace->lookups;
      return add(rows, enc_y);
    case FutureAnchorMode::Routed: {
      RouterTrace rt;
      Tensor out = router_.route(anchor_x, y0, enc_y, &rt);
      if (trace != nullptr) {
        trace->token_builds += rt.token_builds;
        trace->attention_rows = rt.attention_rows;
        trace->attention_cols = rt.attention_cols;
      }
      return out;
    }
  }
  throw Error("unreachable future anchor mode");
}

Tensor PulseModel::decode(const Tensor& y0, const Tensor& anchor_y, const Tensor& mu, const Tensor& sigma) const {
  return denorm_with_stats(y0, anchor_y, mu, sigma, affine());
}

Forecast PulseModel::predict(const WindowBatch& batch) const {
  if (batch.x.rank() != 3 || batch.x.dim(1) != cfg_.lookback || batch.x.dim(2) != cfg_.channels) {
    throw ShapeError(fmt::format("predict: input {} for model T={}, C={}", shape_str(batch.x.shape()), cfg_.lookback,
                                 cfg_.channels));
  }
  Forecast f;
  f.a_x = history_anchor(batch);
  Normalized n = normalize(batch.x, f.a_x);
  f.state = n.state;
  Rng unused(0);
  f.y0 = latent(n.x_tilde, false, unused);
  const Tensor enc_y = future_encoding(batch);
  const Tensor rows = future_mode() == FutureAnchorMode::Lookup ? future_rows(batch.t_end) : Tensor();
  f.a_y = future_anchor(f.a_x, f.y0, enc_y, rows, &f.trace);
  f.y_hat = generative_denorm(f.y0, f.a_y, f.state, affine());
  return f;
}

std::string parameter_group(const std::string& name) { return name.substr(0, name.find('.')); }

}  // namespace pulse
