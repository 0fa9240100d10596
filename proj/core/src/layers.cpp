// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/layers.hpp"

#include <cmath>

#include "pulse/ops.hpp"

namespace pulse {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = (2.0 * rng.uniform() - 1.0) * bound;
  return Tensor(std::move(shape), std::move(v), true);
}

Linear Linear::create(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = in == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(in));
  return {uniform_param({in, out}, bound, rng), Tensor::zeros({out}, true)};
}

Linear Linear::zeros(std::size_t in, std::size_t out) {
  return {Tensor::zeros({in, out}, true), Tensor::zeros({out}, true)};
}

Tensor Linear::operator()(const Tensor& x) const { return linear(x, weight, bias); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

}  // namespace pulse
