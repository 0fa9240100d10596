// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pulse {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  // Empty until the first gradient contribution arrives.
  std::vector<double> grad;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a cheap handle; copies share storage. Operations in ops.hpp never
/// mutate their inputs; only leaf tensors (parameters) are updated in place by
/// optimizers through values_mut().
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->values.size(); }

  std::span<const double> values() const { return node_->values; }
  std::span<double> values_mut() { return node_->values; }
  double item() const;
  double operator[](std::size_t flat) const { return node_->values[flat]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; all zeros when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad();

  /// Deep copy with no gradient tracking.
  Tensor detach() const;
  /// Same node identity (shared storage).
  bool same(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of differentiable operations.
///
/// While a TapeScope is active on the current thread, every operation with at
/// least one gradient-requiring input appends its backward rule here.
/// backward() replays the rules in reverse recording order, so gradients are
/// bitwise reproducible for identical inputs.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { ops_.push_back(std::move(fn)); }
  /// Seeds d(loss)/d(loss) = 1 and propagates to every recorded input.
  void backward(const Tensor& loss);
  std::size_t size() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  std::vector<BackwardFn> ops_;
};

/// Activates a tape for the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Currently active tape on this thread, or nullptr.
Tape* active_tape();

}  // namespace pulse
