// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>

#include "pulse/anchor.hpp"
#include "pulse/error.hpp"
#include "pulse/ops.hpp"
#include "pulse/verify.hpp"
#include "test_util.hpp"

namespace pulse {
namespace {

using test::random_tensor;
using test::to_vector;

TEST(PhaseIndex, HandCases) {
  EXPECT_EQ(phase_index(5, 0, 24, 24), 5u);
  EXPECT_EQ(phase_index(5, 7, 24, 24), 22u);
  EXPECT_EQ(phase_index(100, 0, 24, 12), 4u);
}

TEST(PhaseIndex, RangeAndPeriodicity) {
  for (std::size_t w : {1u, 5u, 24u}) {
    for (std::size_t l : {1u, 4u, 24u, 30u}) {
      const std::int64_t period = std::lcm<std::int64_t>(w, l);
      for (std::int64_t t = 0; t < 200; ++t) {
        for (std::int64_t h : {0, 1, 7, 95}) {
          const auto i = phase_index(t, h, w, l);
          ASSERT_LT(i, l);
          ASSERT_EQ(i, phase_index(t + period, h, w, l));
        }
      }
    }
  }
}

Codebook ramp_codebook(std::size_t size, std::size_t channels) {
  std::vector<double> v(size * channels);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t c = 0; c < channels; ++c) v[i * channels + c] = static_cast<double>(i) + 0.25 * c;
  return Codebook{Tensor({size, channels}, std::move(v), true)};
}

TimeEncoder zero_encoder(std::size_t features, std::size_t channels, std::size_t width) {
  TimeEncoder enc;
  enc.mlp_in = Linear::zeros(features, width);
  enc.mlp_out = Linear::zeros(width, width);
  enc.conv_weight = Tensor::zeros({3, width, width}, true);
  enc.conv_bias = Tensor::zeros({width}, true);
  enc.adapter = Linear::zeros(width, channels);
  return enc;
}

TEST(HistoryAnchor, ZeroCodebookAndZeroMarksGiveZero) {
  Rng rng(43);
  const auto enc = TimeEncoder::create(3, 2, 8, rng);
  const auto cb = Codebook::zeros(24, 2);
  const std::vector<std::size_t> t_end{30, 71};
  const Tensor a = build_history_anchor(cb, enc, t_end, Tensor::zeros({2, 16, 3}), 24);
  EXPECT_EQ(a.shape(), (Shape{2, 16, 2}));
  for (double v : a.values()) EXPECT_EQ(v, 0.0);
}

TEST(HistoryAnchor, AscendingRampWhenWindowEndsAtLastPhase) {
  const std::size_t L = 12;
  const auto cb = ramp_codebook(L, 1);
  const auto enc = zero_encoder(1, 1, 4);
  // t_end mod W = T - 1 with W = L = T.
  const std::vector<std::size_t> t_end{L - 1, 5 * L + L - 1};
  const Tensor a = build_history_anchor(cb, enc, t_end, Tensor::zeros({2, L, 1}), L);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t h = 0; h < L; ++h) EXPECT_EQ(a[b * L + h], static_cast<double>(h));
}

TEST(HistoryAnchor, MatchesBruteForceIndexEnumeration) {
  const std::size_t L = 7, W = 10, T = 15, C = 2;
  const auto cb = ramp_codebook(L, C);
  const auto enc = zero_encoder(1, C, 4);
  const std::vector<std::size_t> t_end{0, 3, 44, 999};
  const Tensor a = build_history_anchor(cb, enc, t_end, Tensor::zeros({4, T, 1}), W);
  for (std::size_t b = 0; b < t_end.size(); ++b) {
    for (std::size_t h = 0; h < T; ++h) {
      const long long back = static_cast<long long>(t_end[b] % W) - static_cast<long long>(T - 1 - h);
      const std::size_t row = static_cast<std::size_t>(((back % (long long)L) + (long long)L) % (long long)L);
      for (std::size_t c = 0; c < C; ++c) EXPECT_EQ(a[(b * T + h) * C + c], cb.table[row * C + c]);
    }
  }
}

TEST(HistoryAnchor, WindowsOneCodebookLengthApartAgree) {
  const auto cb = ramp_codebook(24, 1);
  const auto enc = zero_encoder(1, 1, 4);
  const std::vector<std::size_t> t_end{17, 17 + 24};
  const Tensor a = build_history_anchor(cb, enc, t_end, Tensor::zeros({2, 30, 1}), 24);
  for (std::size_t h = 0; h < 30; ++h) EXPECT_EQ(a[h], a[30 + h]);
}

TEST(HistoryAnchor, CodebookGradientTouchesOnlySelectedRows) {
  const std::size_t L = 24, W = 24, T = 6;
  auto cb = ramp_codebook(L, 1);
  const auto enc = zero_encoder(1, 1, 4);
  const std::vector<std::size_t> t_end{10};
  Tape tape;
  {
    TapeScope scope(tape);
    const Tensor a = build_history_anchor(cb, enc, t_end, Tensor::zeros({1, T, 1}), W);
    tape.backward(sum_all(a));
  }
  // Rows 5..10 feed the window; each contributes once.
  for (std::size_t i = 0; i < L; ++i) EXPECT_EQ(cb.table.grad()[i], (i >= 5 && i <= 10) ? 1.0 : 0.0) << i;
}

TEST(HistoryAnchor, PerturbingOneRowMovesOnlyMatchingSteps) {
  const std::size_t L = 8, W = 8, T = 20;
  auto base = ramp_codebook(L, 1);
  auto bumped = ramp_codebook(L, 1);
  bumped.table.values_mut()[3] += 1.0;
  const auto enc = zero_encoder(1, 1, 4);
  const std::vector<std::size_t> t_end{29};
  const Tensor a0 = build_history_anchor(base, enc, t_end, Tensor::zeros({1, T, 1}), W);
  const Tensor a1 = build_history_anchor(bumped, enc, t_end, Tensor::zeros({1, T, 1}), W);
  for (std::size_t h = 0; h < T; ++h) {
    const bool maps_to_3 = phase_index(29, static_cast<std::int64_t>(T - 1 - h), W, L) == 3;
    EXPECT_EQ(a1[h] - a0[h], maps_to_3 ? 1.0 : 0.0);
  }
}

TEST(FutureAnchor, LookupRowsAdvanceAndRepeat) {
  const std::size_t L = 6;
  const auto cb = ramp_codebook(L, 1);
  const auto enc = zero_encoder(2, 1, 4);
  const std::vector<std::size_t> t_end{4, 4 + L};
  const Tensor a = build_future_anchor_lookup(cb, enc, t_end, Tensor::zeros({2, 9, 2}), L);
  for (std::size_t h = 0; h < 9; ++h) {
    EXPECT_EQ(a[h], static_cast<double>((4 + 1 + h) % L));
    EXPECT_EQ(a[h], a[9 + h]);
  }
  const Tensor zero = build_future_anchor_lookup(Codebook::zeros(L, 1), enc, t_end, Tensor::zeros({2, 9, 2}), L);
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
}

TEST(FutureAnchor, ContinuesHistoryPhase) {
  // Step h after the window uses the same row as history step h + 1 of a
  // window ending h + 1 steps later.
  const std::size_t L = 24, T = 24, H = 12;
  const auto cb = ramp_codebook(L, 1);
  const std::vector<std::size_t> t_end{50};
  const Tensor fut = future_codebook_rows(cb, t_end, H, L);
  for (std::size_t h = 0; h < H; ++h) {
    const std::vector<std::size_t> later{50 + h + 1};
    const Tensor hist = history_codebook_rows(cb, later, T, L);
    EXPECT_EQ(fut[h], hist[T - 1]);
  }
}

TEST(TimeEncoder, ShapesZeroWeightsAndDegenerateLength) {
  Rng rng(43);
  const auto enc = TimeEncoder::create(4, 3, 16, rng);
  Rng mark_rng(1);
  const Tensor marks = random_tensor({7, 4}, mark_rng, -0.5, 0.5, false);
  EXPECT_EQ(time_encode(enc, marks).shape(), (Shape{7, 3}));
  EXPECT_EQ(time_encode(enc, random_tensor({2, 7, 4}, mark_rng, -0.5, 0.5, false)).shape(), (Shape{2, 7, 3}));
  EXPECT_EQ(time_encode(enc, random_tensor({1, 4}, mark_rng, -0.5, 0.5, false)).shape(), (Shape{1, 3}));
  const Tensor zero_out = time_encode(zero_encoder(4, 3, 16), marks);
  for (double v : zero_out.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(time_encode(enc, Tensor::zeros({7, 5})), ShapeError);
}

TEST(TimeEncoder, GradientMatchesFiniteDifferences) {
  Rng rng(43);
  const auto enc = TimeEncoder::create(2, 2, 4, rng);
  Tensor marks = random_tensor({5, 2}, rng, -0.5, 0.5);
  ParamList params;
  enc.collect("enc", params);
  std::vector<Tensor> leaves{marks};
  for (auto& p : params) leaves.push_back(p.tensor);
  EXPECT_LT(gradcheck(leaves, [&] { return time_encode(enc, marks); }, 5, 1e-6), 1e-5);
}

TEST(TimeEncoder, ConvolutionIsLocal) {
  // A change at step 0 reaches steps 0 and 1 only (kernel 3, zero padding).
  Rng rng(43);
  const auto enc = TimeEncoder::create(1, 1, 4, rng);
  const Tensor a = time_encode(enc, Tensor({6, 1}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6}));
  const Tensor b = time_encode(enc, Tensor({6, 1}, {-0.4, 0.2, 0.3, 0.4, 0.5, 0.6}));
  EXPECT_NE(a[0], b[0]);
  EXPECT_NE(a[1], b[1]);
  for (std::size_t i = 2; i < 6; ++i) EXPECT_EQ(a[i], b[i]);
}

}  // namespace
}  // namespace pulse
