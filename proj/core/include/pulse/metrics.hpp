// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pulse/data.hpp"

namespace pulse {

/// Mean |y_t - y_{t-m}| over t = m .. n-1; needs at least m + 1 points.
double seasonal_naive_scale(std::span<const double> series, std::size_t period);

/// Mean absolute forecast error over the seasonal-naive in-sample error plus eps.
double mase(std::span<const double> pred, std::span<const double> target, std::span<const double> insample,
            std::size_t period, double eps = 1e-8);
/// Column-wise MASE of [n x C] matrices, averaged over channels.
double mase(const Matrix& pred, const Matrix& target, const Matrix& insample, std::size_t period, double eps = 1e-8);

struct MismatchValues {
  double ms = 0.0;  // mean shift
  double ss = 0.0;  // standard-deviation shift
  double sm = 0.0;  // half-L1 distance of normalized modulus spectra
};

/// History [T x C] vs future [H x C]; per-channel values averaged over channels.
/// Each window is demeaned and zero-padded to max(T, H) before the transform so
/// bins align; the DC bin is left out. A constant window therefore has zero
/// spectral mass and contributes SM = 0.
MismatchValues mismatch(const Matrix& history, const Matrix& future);

struct MismatchRow {
  std::string dataset;
  std::size_t horizon = 0;
  MismatchValues values;
  std::size_t windows = 0;
};

/// Means over every stride-1 test-split window, one row per horizon.
std::vector<MismatchRow> mismatch_table(const SeriesDataset& ds, std::size_t lookback,
                                        std::span<const std::size_t> horizons, std::size_t threads = 1);

void write_mismatch_csv(std::ostream& out, const std::vector<MismatchRow>& rows, const std::string& header);

}  // namespace pulse
