// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <thread>

#include "pulse/error.hpp"

namespace pulse {

namespace {

constexpr double kMismatchEps = 1e-8;

/// Cosine/sine table for one transform length; entry j is angle 2 pi j / n.
struct Twiddles {
  std::size_t n = 0;
  std::vector<double> cos, sin;

  explicit Twiddles(std::size_t len) : n(len), cos(len), sin(len) {
    for (std::size_t j = 0; j < len; ++j) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(len);
      cos[j] = std::cos(a);
      sin[j] = std::sin(a);
    }
  }
};

/// Modulus spectrum of a demeaned `x` zero-padded to tw.n over bins 1 .. n/2,
/// normalized to sum 1; all zeros if massless.
void normalized_spectrum(std::span<const double> x, const Twiddles& tw, std::vector<double>& out) {
  const std::size_t bins = tw.n / 2 + 1;
  out.assign(bins, 0.0);
  double total = 0.0;
  for (std::size_t k = 1; k < bins; ++k) {
    double re = 0.0, im = 0.0;
    std::size_t j = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      re += x[t] * tw.cos[j];
      im -= x[t] * tw.sin[j];
      j += k;
      if (j >= tw.n) j -= tw.n;
    }
    out[k] = std::hypot(re, im);
    total += out[k];
  }
  if (total > 0.0) {
    for (double& v : out) v /= total;
  }
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(std::span<const double> x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - m.mean) * (v - m.mean);
  m.std = std::sqrt(var / static_cast<double>(x.size()));
  return m;
}

MismatchValues mismatch_with(const Matrix& history, const Matrix& future, const Twiddles& tw) {
  MismatchValues total;
  std::vector<double> xs(history.rows), ys(future.rows), ax, ay;
  for (std::size_t c = 0; c < history.cols; ++c) {
    for (std::size_t t = 0; t < history.rows; ++t) xs[t] = history(t, c);
    for (std::size_t t = 0; t < future.rows; ++t) ys[t] = future(t, c);
    const Moments mx = moments(xs), my = moments(ys);
    total.ms += std::abs(my.mean - mx.mean) / (std::abs(my.mean) + std::abs(mx.mean) + kMismatchEps);
    total.ss += std::abs(my.std - mx.std) / (my.std + mx.std + kMismatchEps);
    for (double& v : xs) v -= mx.mean;
    for (double& v : ys) v -= my.mean;
    normalized_spectrum(xs, tw, ax);
    normalized_spectrum(ys, tw, ay);
    const double mass_x = std::accumulate(ax.begin(), ax.end(), 0.0);
    const double mass_y = std::accumulate(ay.begin(), ay.end(), 0.0);
    if (mass_x > 0.0 && mass_y > 0.0) {
      double l1 = 0.0;
      for (std::size_t k = 0; k < ax.size(); ++k) l1 += std::abs(ax[k] - ay[k]);
      total.sm += 0.5 * l1;
    }
  }
  const double c = static_cast<double>(history.cols);
  return {total.ms / c, total.ss / c, total.sm / c};
}

}  // namespace

double seasonal_naive_scale(std::span<const double> series, std::size_t period) {
  if (period == 0) throw DataError("MASE seasonal period must be >= 1");
  if (series.size() < period + 1) {
    throw DataError(fmt::format("MASE needs at least {} in-sample points, got {}", period + 1, series.size()));
  }
  double sum = 0.0;
  for (std::size_t t = period; t < series.size(); ++t) sum += std::abs(series[t] - series[t - period]);
  return sum / static_cast<double>(series.size() - period);
}

double mase(std::span<const double> pred, std::span<const double> target, std::span<const double> insample,
            std::size_t period, double eps) {
  if (pred.size() != target.size() || pred.empty()) {
    throw ShapeError(fmt::format("mase: {} predictions for {} targets", pred.size(), target.size()));
  }
  double err = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) err += std::abs(target[i] - pred[i]);
  err /= static_cast<double>(pred.size());
  return err / (seasonal_naive_scale(insample, period) + eps);
}

double mase(const Matrix& pred, const Matrix& target, const Matrix& insample, std::size_t period, double eps) {
  if (pred.rows != target.rows || pred.cols != target.cols || insample.cols != pred.cols || pred.cols == 0) {
    throw ShapeError("mase: prediction, target and in-sample matrices disagree");
  }
  double total = 0.0;
  std::vector<double> p(pred.rows), y(pred.rows), s(insample.rows);
  for (std::size_t c = 0; c < pred.cols; ++c) {
    for (std::size_t t = 0; t < pred.rows; ++t) {
      p[t] = pred(t, c);
      y[t] = target(t, c);
    }
    for (std::size_t t = 0; t < insample.rows; ++t) s[t] = insample(t, c);
    total += mase(p, y, s, period, eps);
  }
  return total / static_cast<double>(pred.cols);
}

MismatchValues mismatch(const Matrix& history, const Matrix& future) {
  if (history.rows < 2 || future.rows < 2 || history.cols != future.cols || history.cols == 0) {
    throw ShapeError(fmt::format("mismatch: history {}x{} vs future {}x{} (need >= 2 rows, equal channels)",
                                 history.rows, history.cols, future.rows, future.cols));
  }
  const Twiddles tw(std::max(history.rows, future.rows));
  return mismatch_with(history, future, tw);
}

std::vector<MismatchRow> mismatch_table(const SeriesDataset& ds, std::size_t lookback,
                                        std::span<const std::size_t> horizons, std::size_t threads) {
  const SplitRange test = ds.range(Split::Test);
  const std::size_t channels = ds.channels();
  std::vector<MismatchRow> rows;
  for (std::size_t horizon : horizons) {
    if (lookback < 2 || horizon < 2) throw DataError("mismatch_table: lookback and horizon must be >= 2");
    if (lookback + horizon > test.size()) {
      throw DataError(fmt::format("test split of '{}' has {} rows; T + H = {} does not fit", ds.name, test.size(),
                                  lookback + horizon));
    }
    const std::size_t count = test.size() - lookback - horizon + 1;
    const Twiddles tw(std::max(lookback, horizon));
    std::vector<MismatchValues> per_window(count);

    auto work = [&](std::size_t w) {
      Matrix x(lookback, channels), y(horizon, channels);
      const std::size_t start = test.begin + w;
      for (std::size_t t = 0; t < lookback; ++t) {
        for (std::size_t c = 0; c < channels; ++c) x(t, c) = ds.values(start + t, c);
      }
      for (std::size_t t = 0; t < horizon; ++t) {
        for (std::size_t c = 0; c < channels; ++c) y(t, c) = ds.values(start + lookback + t, c);
      }
      per_window[w] = mismatch_with(x, y, tw);
    };

    const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
    if (workers <= 1) {
      for (std::size_t w = 0; w < count; ++w) work(w);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
          for (std::size_t w = next++; w < count; w = next++) work(w);
        });
      }
      for (auto& th : pool) th.join();
    }

    MismatchRow row;
    row.dataset = ds.name;
    row.horizon = horizon;
    row.windows = count;
    for (const auto& v : per_window) {
      row.values.ms += v.ms;
      row.values.ss += v.ss;
      row.values.sm += v.sm;
    }
    row.values.ms /= static_cast<double>(count);
    row.values.ss /= static_cast<double>(count);
    row.values.sm /= static_cast<double>(count);
    rows.push_back(row);
  }
  return rows;
}

void write_mismatch_csv(std::ostream& out, const std::vector<MismatchRow>& rows, const std::string& header) {
  out << header << "\n" << "dataset,horizon,MS,SS,SM,windows\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", r.dataset, r.horizon, r.values.ms, r.values.ss, r.values.sm, r.windows);
  }
}

}  // namespace pulse
