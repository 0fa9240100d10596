// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Ordered parameter list; the order fixes optimizer state and checkpoint layout.
using ParamList = std::vector<NamedTensor>;

/// Affine map over the last axis: y = x W + b, W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  /// Weights ~ U(-1/sqrt(in), 1/sqrt(in)), zero bias.
  static Linear create(std::size_t in, std::size_t out, Rng& rng);
  static Linear zeros(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

/// Uniform(-bound, bound) leaf tensor with gradients enabled.
Tensor uniform_param(Shape shape, double bound, Rng& rng);

}  // namespace pulse
