// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// Variance floor shared by every standard-deviation computation.
inline constexpr double kVarianceEps = 1e-8;

// Elementwise arithmetic with right-aligned broadcasting (a dimension of size 1,
// or a missing leading dimension, stretches to match the other operand).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& x, double s);
Tensor mul_scalar(const Tensor& x, double s);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);

/// tanh-approximated GELU.
Tensor gelu(const Tensor& x);

/// Softmax over the last axis, computed with max subtraction.
Tensor softmax(const Tensor& x);

/// a: [..., m, k] times b: [k, n] -> [..., m, n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Batched product a: [B, m, k] times b: [B, k, n] -> [B, m, n].
Tensor bmm(const Tensor& a, const Tensor& b);
/// x: [..., in] times weight: [in, out] plus bias: [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor permute(const Tensor& x, std::span<const std::size_t> axes);
Tensor permute(const Tensor& x, std::initializer_list<std::size_t> axes);
Tensor reshape(const Tensor& x, Shape shape);
/// Inserts `count` zeros before the existing entries along `axis`.
Tensor pad_front(const Tensor& x, std::size_t axis, std::size_t count);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// Gathers slices along axis 0: out[i, ...] = x[indices[i], ...]. Backward scatter-adds.
Tensor take(const Tensor& x, std::span<const std::size_t> indices);
/// Row-wise convex combination along axis 0: out[r] = w_r x[r] + (1 - w_r) x[perm[r]].
/// Evaluated as x[r] + (1 - w_r)(x[perm[r]] - x[r]) and kept inside the pair's
/// closed interval, so w_r = 1 and fixed points return x[r] exactly.
Tensor convex_mix(const Tensor& x, std::span<const std::size_t> perm, std::span<const double> weights);

/// Mean along `axis`, keeping it as a size-1 dimension.
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

struct MeanStd {
  Tensor mean;
  Tensor std;
};
/// Population mean and std along `axis` (kept as size 1); std = sqrt(var + kVarianceEps).
MeanStd mean_std(const Tensor& x, std::size_t axis);

/// 1-D convolution over axis 1 of x: [N, len, c_in] with weight [3, c_in, c_out],
/// bias [c_out]. Same-length output, zero padding at both ends.
Tensor conv1d_same(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// Inverted dropout. Identity (same tensor) when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

struct Spectrum {
  Tensor re;
  Tensor im;
};
/// One-sided unnormalized real DFT along the last axis: N -> N/2 + 1 bins.
Spectrum rdft(const Tensor& x);
/// Transpose of the rdft linear map, for rows of length n.
std::vector<double> rdft_adjoint(std::span<const double> re, std::span<const double> im,
                                 std::size_t n);

/// Throws NumericError naming `what` if any value is NaN or infinite.
void check_finite(std::span<const double> values, const char* what);

}  // namespace pulse
