// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/norm.hpp"

#include <fmt/format.h>

#include "pulse/error.hpp"

namespace pulse {

RevinAffine RevinAffine::identity(std::size_t channels) {
  return {Tensor::full({channels}, 1.0, true), Tensor::zeros({channels}, true)};
}

void RevinAffine::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

Normalized disentangle_normalize(const Tensor& x, const Tensor& anchor, const RevinAffine* affine) {
  if (x.shape() != anchor.shape() || x.rank() != 3) {
    throw ShapeError(fmt::format("disentangle_normalize: input {} vs anchor {}", shape_str(x.shape()),
                                 shape_str(anchor.shape())));
  }
  const Tensor residual = sub(x, anchor);
  auto [mu, sigma] = mean_std(residual, 1);
  Tensor z = div(sub(residual, mu), sigma);
  if (affine != nullptr) z = add(mul(z, affine->gamma), affine->beta);
  return {add(z, anchor), NormState{mu, sigma, kVarianceEps}};
}

Tensor denorm_with_stats(const Tensor& y0, const Tensor& anchor_y, const Tensor& mu, const Tensor& sigma,
                         const RevinAffine* affine) {
  if (y0.shape() != anchor_y.shape() || y0.rank() != 3) {
    throw ShapeError(fmt::format("denorm: latent {} vs anchor {}", shape_str(y0.shape()), shape_str(anchor_y.shape())));
  }
  if (mu.rank() != 3 || sigma.shape() != mu.shape() || mu.dim(0) != y0.dim(0) || mu.dim(1) != 1 ||
      mu.dim(2) != y0.dim(2)) {
    throw ShapeError(fmt::format("denorm: statistics {} / {} for latent {}", shape_str(mu.shape()),
                                 shape_str(sigma.shape()), shape_str(y0.shape())));
  }
  for (double s : sigma.values()) {
    if (!(s > 0.0)) throw NumericError("denorm: sigma must be positive");
  }
  Tensor z = sub(y0, anchor_y);
  if (affine != nullptr) z = div(sub(z, affine->beta), affine->gamma);
  return add(add(mul(z, sigma), mu), anchor_y);
}

Tensor generative_denorm(const Tensor& y0, const Tensor& anchor_y, const NormState& state, const RevinAffine* affine) {
  return denorm_with_stats(y0, anchor_y, state.mu, state.sigma, affine);
}

Tensor instance_normalize(const Tensor& x) {
  auto [mu, sigma] = mean_std(x, 1);
  return div(sub(x, mu), sigma);
}

}  // namespace pulse
