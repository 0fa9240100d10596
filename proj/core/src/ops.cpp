// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/ops.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>

#include "pulse/error.hpp"

namespace pulse {

namespace {

using NodePtr = std::shared_ptr<detail::TensorNode>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

/// Wraps freshly computed values into a tensor and, when tracking, records the
/// backward rule. The rule receives the output gradient.
template <class Fn>
Tensor finish(Shape shape, std::vector<double> values, const char* what, bool track, Fn backward) {
  check_finite(values, what);
  Tensor out(std::move(shape), std::move(values), track);
  if (track) {
    NodePtr out_node = out.node();
    active_tape()->record([out_node, fn = std::move(backward)]() {
      if (out_node->grad.empty()) return;
      if constexpr (std::is_invocable_v<Fn, const std::vector<double>&, const std::vector<double>&>) {
        fn(out_node->grad, out_node->values);
      } else {
        fn(out_node->grad);
      }
    });
  }
  return out;
}

/// Returns the node's gradient buffer when it participates in differentiation.
double* grad_of(const NodePtr& n) {
  if (!n->requires_grad) return nullptr;
  n->ensure_grad();
  return n->grad.data();
}

struct BroadcastPlan {
  Shape out;
  bool same = false;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

BroadcastPlan broadcast(const Shape& a, const Shape& b, const char* what) {
  BroadcastPlan plan;
  if (a == b) {
    plan.out = a;
    plan.same = true;
    return plan;
  }
  const std::size_t r = std::max(a.size(), b.size());
  Shape pa(r, 1), pb(r, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(r - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(r - b.size()));
  plan.out.resize(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (pa[i] == pb[i] || pb[i] == 1) {
      plan.out[i] = pa[i];
    } else if (pa[i] == 1) {
      plan.out[i] = pb[i];
    } else {
      throw ShapeError(fmt::format("{}: cannot broadcast {} with {}", what, shape_str(a), shape_str(b)));
    }
  }
  std::vector<std::size_t> sa(r, 0), sb(r, 0);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t i = r; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : acc_a;
    sb[i] = pb[i] == 1 ? 0 : acc_b;
    acc_a *= pa[i];
    acc_b *= pb[i];
  }
  const std::size_t n = shape_numel(plan.out);
  plan.ia.resize(n);
  plan.ib.resize(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t k = 0; k < n; ++k) {
    plan.ia[k] = oa;
    plan.ib[k] = ob;
    for (std::size_t d = r; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < plan.out[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
  return plan;
}

/// f(x, y) forward, da(x, y, g) and db(x, y, g) partial contributions.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* what, F f, DA da, DB db) {
  auto plan = std::make_shared<BroadcastPlan>(broadcast(a.shape(), b.shape(), what));
  const auto n = shape_numel(plan->out);
  std::vector<double> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  if (plan->same) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[plan->ia[i]], bv[plan->ib[i]]);
  }
  NodePtr an = a.node(), bn = b.node();
  return finish(plan->out, std::move(out), what, tracking({&a, &b}),
                [an, bn, plan, da, db](const std::vector<double>& g) {
                  double* ga = grad_of(an);
                  double* gb = grad_of(bn);
                  const auto& x = an->values;
                  const auto& y = bn->values;
                  const std::size_t m = g.size();
                  for (std::size_t i = 0; i < m; ++i) {
                    const std::size_t i_a = plan->same ? i : plan->ia[i];
                    const std::size_t i_b = plan->same ? i : plan->ib[i];
                    if (ga != nullptr) ga[i_a] += da(x[i_a], y[i_b], g[i]);
                    if (gb != nullptr) gb[i_b] += db(x[i_a], y[i_b], g[i]);
                  }
                });
}

template <class F, class D>
Tensor unary(const Tensor& x, const char* what, F f, D d) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  NodePtr xn = x.node();
  return finish(x.shape(), std::move(out), what, tracking({&x}),
                [xn, d](const std::vector<double>& g, const std::vector<double>& y) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += d(xn->values[i], y[i], g[i]);
                });
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

/// Splits a shape at `axis` into (outer, length, inner) element counts.
struct AxisSplit {
  std::size_t outer, len, inner;
};

AxisSplit split_at(const Shape& s, std::size_t axis, const char* what) {
  if (axis >= s.size()) {
    throw ShapeError(fmt::format("{}: axis {} out of range for {}", what, axis, shape_str(s)));
  }
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(fmt::format("{}: non-finite value produced", what));
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; }, [](double x, double, double g) { return g * x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double g) { return g / y; },
      [](double x, double y, double g) { return -g * x / (y * y); });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary(
      x, "add_scalar", [s](double v) { return v + s; }, [](double, double, double g) { return g; });
}

Tensor mul_scalar(const Tensor& x, double s) {
  return unary(
      x, "mul_scalar", [s](double v) { return v * s; }, [s](double, double, double g) { return g * s; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.values()) {
    if (v < 0.0) throw NumericError("sqrt: negative input");
  }
  return unary(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y, double g) { return g / (2.0 * y); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, "square", [](double v) { return v * v; }, [](double v, double, double g) { return 2.0 * v * g; });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double k = 0.044715;
  return unary(
      x, "gelu",
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v))); },
      [](double v, double, double g) {
        const double t = std::tanh(c * (v + k * v * v * v));
        const double dt = (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v);
        return g * (0.5 * (1.0 + t) + 0.5 * v * dt);
      });
}

Tensor softmax(const Tensor& x) {
  if (x.rank() == 0) throw ShapeError("softmax: scalar input");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = std::exp(in[i] - mx);
      total += o[i];
    }
    for (std::size_t i = 0; i < n; ++i) o[i] /= total;
  }
  NodePtr xn = x.node();
  return finish(x.shape(), std::move(out), "softmax", tracking({&x}),
                [xn, n, rows](const std::vector<double>& g_all, const std::vector<double>& y_all) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* y = y_all.data() + r * n;
                    const double* g = g_all.data() + r * n;
                    double dot = 0.0;
                    for (std::size_t i = 0; i < n; ++i) dot += g[i] * y[i];
                    for (std::size_t i = 0; i < n; ++i) gx[r * n + i] += y[i] * (g[i] - dot);
                  }
                });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || b.rank() != 2 || a.shape().back() != b.dim(0)) {
    throw ShapeError(fmt::format("matmul: incompatible shapes {} and {}", shape_str(a.shape()),
                                 shape_str(b.shape())));
  }
  const std::size_t k = b.dim(0), n = b.dim(1);
  const std::size_t m = shape_numel(Shape(a.shape().begin(), a.shape().end() - 1));
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* o = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += x * brow[j];
    }
  }
  Shape shape = a.shape();
  shape.back() = n;
  NodePtr an = a.node(), bn = b.node();
  return finish(std::move(shape), std::move(out), "matmul", tracking({&a, &b}),
                [an, bn, m, k, n](const std::vector<double>& g) {
                  double* ga = grad_of(an);
                  double* gb = grad_of(bn);
                  const double* A = an->values.data();
                  const double* B = bn->values.data();
                  if (ga != nullptr) {
                    for (std::size_t i = 0; i < m; ++i) {
                      const double* gi = g.data() + i * n;
                      for (std::size_t p = 0; p < k; ++p) {
                        const double* brow = B + p * n;
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += gi[j] * brow[j];
                        ga[i * k + p] += s;
                      }
                    }
                  }
                  if (gb != nullptr) {
                    for (std::size_t i = 0; i < m; ++i) {
                      const double* gi = g.data() + i * n;
                      for (std::size_t p = 0; p < k; ++p) {
                        const double x = A[i * k + p];
                        double* gbrow = gb + p * n;
                        for (std::size_t j = 0; j < n; ++j) gbrow[j] += x * gi[j];
                      }
                    }
                  }
                });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw ShapeError(fmt::format("bmm: incompatible shapes {} and {}", shape_str(a.shape()),
                                 shape_str(b.shape())));
  }
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(batch * m * n, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* A = av.data() + s * m * k;
    const double* B = bv.data() + s * k * n;
    double* O = out.data() + s * m * n;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double x = A[i * k + p];
        for (std::size_t j = 0; j < n; ++j) O[i * n + j] += x * B[p * n + j];
      }
    }
  }
  NodePtr an = a.node(), bn = b.node();
  return finish({batch, m, n}, std::move(out), "bmm", tracking({&a, &b}),
                [an, bn, batch, m, k, n](const std::vector<double>& g) {
                  double* ga = grad_of(an);
                  double* gb = grad_of(bn);
                  for (std::size_t s = 0; s < batch; ++s) {
                    const double* A = an->values.data() + s * m * k;
                    const double* B = bn->values.data() + s * k * n;
                    const double* G = g.data() + s * m * n;
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) {
                        if (ga != nullptr) {
                          double acc = 0.0;
                          for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B[p * n + j];
                          ga[s * m * k + i * k + p] += acc;
                        }
                        if (gb != nullptr) {
                          const double x = A[i * k + p];
                          for (std::size_t j = 0; j < n; ++j) gb[s * k * n + p * n + j] += x * G[i * n + j];
                        }
                      }
                    }
                  }
                });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add(matmul(x, weight), bias);
}

Tensor permute(const Tensor& x, std::span<const std::size_t> axes) {
  const auto& in_shape = x.shape();
  if (axes.size() != in_shape.size()) {
    throw ShapeError(fmt::format("permute: {} axes for shape {}", axes.size(), shape_str(in_shape)));
  }
  std::vector<bool> seen(axes.size(), false);
  Shape out_shape(axes.size());
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] >= axes.size() || seen[axes[i]]) throw ShapeError("permute: axes are not a permutation");
    seen[axes[i]] = true;
    out_shape[i] = in_shape[axes[i]];
  }
  const auto in_strides = strides_of(in_shape);
  const std::size_t n = x.numel();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(axes.size(), 0);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < n; ++k) {
    (*src)[k] = offset;
    for (std::size_t d = axes.size(); d-- > 0;) {
      ++idx[d];
      offset += in_strides[axes[d]];
      if (idx[d] < out_shape[d]) break;
      offset -= in_strides[axes[d]] * idx[d];
      idx[d] = 0;
    }
  }
  const auto xv = x.values();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = xv[(*src)[k]];
  NodePtr xn = x.node();
  return finish(std::move(out_shape), std::move(out), "permute", tracking({&x}),
                [xn, src](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t k = 0; k < g.size(); ++k) gx[(*src)[k]] += g[k];
                });
}

Tensor permute(const Tensor& x, std::initializer_list<std::size_t> axes) {
  return permute(x, std::span<const std::size_t>(axes.begin(), axes.size()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError(fmt::format("reshape: {} -> {}", shape_str(x.shape()), shape_str(shape)));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  NodePtr xn = x.node();
  return finish(std::move(shape), std::move(out), "reshape", tracking({&x}),
                [xn](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t k = 0; k < g.size(); ++k) gx[k] += g[k];
                });
}

Tensor pad_front(const Tensor& x, std::size_t axis, std::size_t count) {
  const auto s = split_at(x.shape(), axis, "pad_front");
  if (count == 0) return x;
  const std::size_t new_len = s.len + count;
  Shape shape = x.shape();
  shape[axis] = new_len;
  const auto xv = x.values();
  std::vector<double> out(s.outer * new_len * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + o * s.len * s.inner, s.len * s.inner,
                out.data() + (o * new_len + count) * s.inner);
  }
  NodePtr xn = x.node();
  return finish(std::move(shape), std::move(out), "pad_front", tracking({&x}),
                [xn, s, count, new_len](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t o = 0; o < s.outer; ++o) {
                    const double* src = g.data() + (o * new_len + count) * s.inner;
                    double* dst = gx + o * s.len * s.inner;
                    for (std::size_t i = 0; i < s.len * s.inner; ++i) dst[i] += src[i];
                  }
                });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const auto s = split_at(x.shape(), axis, "slice");
  if (start + length > s.len) {
    throw ShapeError(fmt::format("slice: [{}, {}) exceeds axis length {}", start, start + length, s.len));
  }
  Shape shape = x.shape();
  shape[axis] = length;
  const auto xv = x.values();
  std::vector<double> out(s.outer * length * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + (o * s.len + start) * s.inner, length * s.inner,
                out.data() + o * length * s.inner);
  }
  NodePtr xn = x.node();
  return finish(std::move(shape), std::move(out), "slice", tracking({&x}),
                [xn, s, start, length](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t o = 0; o < s.outer; ++o) {
                    const double* src = g.data() + o * length * s.inner;
                    double* dst = gx + (o * s.len + start) * s.inner;
                    for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
                  }
                });
}

Tensor take(const Tensor& x, std::span<const std::size_t> indices) {
  if (x.rank() == 0) throw ShapeError("take: scalar input");
  const std::size_t rows = x.dim(0);
  const std::size_t inner = x.numel() / std::max<std::size_t>(rows, 1);
  for (auto i : indices) {
    if (i >= rows) throw ShapeError(fmt::format("take: index {} out of range [0, {})", i, rows));
  }
  Shape shape = x.shape();
  shape[0] = indices.size();
  const auto xv = x.values();
  std::vector<double> out(indices.size() * inner);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    std::copy_n(xv.data() + indices[r] * inner, inner, out.data() + r * inner);
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(indices.begin(), indices.end());
  NodePtr xn = x.node();
  return finish(std::move(shape), std::move(out), "take", tracking({&x}),
                [xn, idx, inner](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t r = 0; r < idx->size(); ++r) {
                    double* dst = gx + (*idx)[r] * inner;
                    const double* src = g.data() + r * inner;
                    for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
                  }
                });
}

Tensor convex_mix(const Tensor& x, std::span<const std::size_t> perm, std::span<const double> weights) {
  if (x.rank() == 0) throw ShapeError("convex_mix: scalar input");
  const std::size_t rows = x.dim(0);
  if (perm.size() != rows || weights.size() != rows) {
    throw ShapeError(fmt::format("convex_mix: {} rows, {} perm entries, {} weights", rows, perm.size(), weights.size()));
  }
  for (auto p : perm) {
    if (p >= rows) throw ShapeError(fmt::format("convex_mix: perm entry {} out of range", p));
  }
  const std::size_t inner = x.numel() / std::max<std::size_t>(rows, 1);
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double keep = weights[r];
    const double w = 1.0 - keep;
    const double* a = xv.data() + r * inner;
    const double* b = xv.data() + perm[r] * inner;
    double* o = out.data() + r * inner;
    for (std::size_t i = 0; i < inner; ++i) {
      const double v = a[i] + w * (b[i] - a[i]);
      o[i] = std::clamp(v, std::min(a[i], b[i]), std::max(a[i], b[i]));
    }
  }
  auto p = std::make_shared<std::vector<std::size_t>>(perm.begin(), perm.end());
  auto lw = std::make_shared<std::vector<double>>(weights.begin(), weights.end());
  NodePtr xn = x.node();
  return finish(x.shape(), std::move(out), "convex_mix", tracking({&x}),
                [xn, p, lw, inner](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t r = 0; r < p->size(); ++r) {
                    const double keep = (*lw)[r];
                    const double w = 1.0 - keep;
                    const double* src = g.data() + r * inner;
                    double* own = gx + r * inner;
                    double* other = gx + (*p)[r] * inner;
                    for (std::size_t i = 0; i < inner; ++i) {
                      own[i] += keep * src[i];
                      other[i] += w * src[i];
                    }
                  }
                });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis, "mean");
  if (s.len == 0) throw ShapeError("mean: empty axis");
  Shape shape = x.shape();
  shape[axis] = 1;
  const auto xv = x.values();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t t = 0; t < s.len; ++t) {
      const double* row = xv.data() + (o * s.len + t) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  const double scale = 1.0 / static_cast<double>(s.len);
  for (auto& v : out) v *= scale;
  NodePtr xn = x.node();
  return finish(std::move(shape), std::move(out), "mean", tracking({&x}),
                [xn, s, scale](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  if (gx == nullptr) return;
                  for (std::size_t o = 0; o < s.outer; ++o) {
                    for (std::size_t t = 0; t < s.len; ++t) {
                      double* dst = gx + (o * s.len + t) * s.inner;
                      const double* src = g.data() + o * s.inner;
                      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i] * scale;
                    }
                  }
                });
}

Tensor sum_all(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  NodePtr xn = x.node();
  return finish({}, {total}, "sum_all", tracking({&x}), [xn](const std::vector<double>& g) {
    double* gx = grad_of(xn);
    if (gx == nullptr) return;
    for (std::size_t k = 0; k < xn->values.size(); ++k) gx[k] += g[0];
  });
}

Tensor mean_all(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean_all: empty tensor");
  return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

MeanStd mean_std(const Tensor& x, std::size_t axis) {
  Tensor mu = mean(x, axis);
  Tensor var = mean(square(sub(x, mu)), axis);
  return {mu, sqrt(add_scalar(var, kVarianceEps))};
}

Tensor conv1d_same(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || weight.rank() != 3 || weight.dim(0) != 3 || weight.dim(1) != x.dim(2) ||
      bias.rank() != 1 || bias.dim(0) != weight.dim(2)) {
    throw ShapeError(fmt::format("conv1d_same: input {}, weight {}, bias {}", shape_str(x.shape()),
                                 shape_str(weight.shape()), shape_str(bias.shape())));
  }
  const std::size_t batch = x.dim(0), len = x.dim(1), cin = x.dim(2), cout = weight.dim(2);
  const auto xv = x.values();
  const auto wv = weight.values();
  const auto bv = bias.values();
  std::vector<double> out(batch * len * cout);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      double* o = out.data() + (b * len + t) * cout;
      std::copy(bv.begin(), bv.end(), o);
      for (std::size_t j = 0; j < 3; ++j) {
        const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t + j) - 1;
        if (src_t < 0 || src_t >= static_cast<std::ptrdiff_t>(len)) continue;
        const double* in = xv.data() + (b * len + static_cast<std::size_t>(src_t)) * cin;
        for (std::size_t i = 0; i < cin; ++i) {
          const double* w = wv.data() + (j * cin + i) * cout;
          for (std::size_t c = 0; c < cout; ++c) o[c] += in[i] * w[c];
        }
      }
    }
  }
  NodePtr xn = x.node(), wn = weight.node(), bn = bias.node();
  return finish({batch, len, cout}, std::move(out), "conv1d_same", tracking({&x, &weight, &bias}),
                [xn, wn, bn, batch, len, cin, cout](const std::vector<double>& g) {
                  double* gx = grad_of(xn);
                  double* gw = grad_of(wn);
                  double* gb = grad_of(bn);
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t t = 0; t < len; ++t) {
                      const double* go = g.data() + (b * len + t) * cout;
                      if (gb != nullptr) {
                        for (std::size_t c = 0; c < cout; ++c) gb[c] += go[c];
                      }
                      for (std::size_t j = 0; j < 3; ++j) {
                        const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t + j) - 1;
                        if (src_t < 0 || src_t >= static_cast<std::ptrdiff_t>(len)) continue;
                        const std::size_t base = (b * len + static_cast<std::size_t>(src_t)) * cin;
                        for (std::size_t i = 0; i < cin; ++i) {
                          const double* w = wn->values.data() + (j * cin + i) * cout;
                          double acc = 0.0;
                          for (std::size_t c = 0; c < cout; ++c) {
                            acc += go[c] * w[c];
                            if (gw != nullptr) gw[(j * cin + i) * cout + c] += xn->values[base + i] * go[c];
                          }
                          if (gx != nullptr) gx[base + i] += acc;
                        }
                      }
                    }
                  }
                });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (!training || rate <= 0.0) return x;
  if (rate >= 1.0) throw NumericError("dropout: rate must be < 1");
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() >= rate ? keep : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

namespace {

struct Twiddles {
  std::size_t n, bins;
  std::vector<double> cos_t, sin_t;  // bins x n
};

// Direct O(N^2) transform. Horizons in this project are not powers of two and
// stay below ~1000 samples, so a radix-2 or Bluestein FFT buys nothing here.
Twiddles make_twiddles(std::size_t n) {
  Twiddles tw{n, n / 2 + 1, {}, {}};
  tw.cos_t.resize(tw.bins * n);
  tw.sin_t.resize(tw.bins * n);
  for (std::size_t k = 0; k < tw.bins; ++k) {
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
      tw.cos_t[k * n + t] = std::cos(angle);
      tw.sin_t[k * n + t] = std::sin(angle);
    }
  }
  return tw;
}

}  // namespace

Spectrum rdft(const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0) throw ShapeError("rdft: needs a non-empty last axis");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  auto tw = std::make_shared<Twiddles>(make_twiddles(n));
  const std::size_t bins = tw->bins;
  const auto xv = x.values();
  std::vector<double> re(rows * bins, 0.0), im(rows * bins, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    for (std::size_t k = 0; k < bins; ++k) {
      const double* c = tw->cos_t.data() + k * n;
      const double* s = tw->sin_t.data() + k * n;
      double acc_re = 0.0, acc_im = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        acc_re += in[t] * c[t];
        acc_im -= in[t] * s[t];
      }
      re[r * bins + k] = acc_re;
      im[r * bins + k] = acc_im;
    }
  }
  Shape shape = x.shape();
  shape.back() = bins;
  NodePtr xn = x.node();
  const bool track = tracking({&x});
  auto backward_for = [xn, tw, rows, n, bins](bool imaginary) {
    return [xn, tw, rows, n, bins, imaginary](const std::vector<double>& g) {
      double* gx = grad_of(xn);
      if (gx == nullptr) return;
      const auto& table = imaginary ? tw->sin_t : tw->cos_t;
      const double sign = imaginary ? -1.0 : 1.0;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < bins; ++k) {
          const double gk = sign * g[r * bins + k];
          const double* row = table.data() + k * n;
          double* dst = gx + r * n;
          for (std::size_t t = 0; t < n; ++t) dst[t] += gk * row[t];
        }
      }
    };
  };
  Tensor re_t = finish(shape, std::move(re), "rdft", track, backward_for(false));
  Tensor im_t = finish(shape, std::move(im), "rdft", track, backward_for(true));
  return {re_t, im_t};
}

std::vector<double> rdft_adjoint(std::span<const double> re, std::span<const double> im, std::size_t n) {
  const std::size_t bins = n / 2 + 1;
  if (re.size() != im.size() || re.size() % bins != 0) {
    throw ShapeError(fmt::format("rdft_adjoint: {} / {} values for {} bins", re.size(), im.size(), bins));
  }
  const auto tw = make_twiddles(n);
  const std::size_t rows = re.size() / bins;
  std::vector<double> out(rows * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < bins; ++k) {
      for (std::size_t t = 0; t < n; ++t) {
        out[r * n + t] += re[r * bins + k] * tw.cos_t[k * n + t] - im[r * bins + k] * tw.sin_t[k * n + t];
      }
    }
  }
  return out;
}

}  // namespace pulse
