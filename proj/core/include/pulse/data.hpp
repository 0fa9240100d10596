// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pulse/rng.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// Row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct CalendarTime {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;

  auto operator<=>(const CalendarTime&) const = default;
};

/// Parses "YYYY-MM-DD HH:MM[:SS]" (a 'T' separator is also accepted).
std::optional<CalendarTime> parse_timestamp(std::string_view text);
std::string format_timestamp(const CalendarTime& t);
/// Adds whole minutes, rolling over days, months and years.
CalendarTime add_minutes(const CalendarTime& t, long long minutes);

enum class Split { Train, Val, Test };
std::string_view split_name(Split split);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;

  bool operator==(const SplitRatios&) const = default;
};

struct SplitRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Multivariate series with calendar timestamps, contiguous train/val/test
/// splits, and values z-scored with train-split statistics.
struct SeriesDataset {
  std::string name;
  std::vector<std::string> channel_names;
  std::vector<CalendarTime> timestamps;
  Matrix raw;
  Matrix values;
  SplitRatios ratios;
  std::vector<double> train_mean;
  std::vector<double> train_std;
  std::array<SplitRange, 3> splits{};

  std::size_t length() const { return values.rows; }
  std::size_t channels() const { return values.cols; }
  const SplitRange& range(Split s) const { return splits[static_cast<std::size_t>(s)]; }
};

/// Splits (train = floor(n * r_train), test = floor(n * r_test), val = rest) and
/// z-scores with train statistics. Constant train channels get std 1 and a warning.
SeriesDataset make_dataset(std::string name, std::vector<std::string> channel_names,
                           std::vector<CalendarTime> timestamps, Matrix raw, SplitRatios ratios);

SeriesDataset load_csv(const std::filesystem::path& path, std::string_view timestamp_column = "date",
                       SplitRatios ratios = {});
SeriesDataset read_csv(std::istream& in, std::string name, std::string_view timestamp_column = "date",
                       SplitRatios ratios = {});
/// Writes the raw values in the loadable layout (date column first).
void write_csv(std::ostream& out, const SeriesDataset& ds);

enum class CalendarFeature { MinuteOfHour, HourOfDay, DayOfWeek, DayOfMonth, DayOfYear };

struct MarkSpec {
  std::vector<CalendarFeature> features;
  std::size_t size() const { return features.size(); }
};

/// Comma-separated feature names, e.g. "HourOfDay,DayOfWeek". Empty string -> no features.
MarkSpec parse_mark_spec(std::string_view text);
std::string to_string(const MarkSpec& marks);

/// Calendar features scaled to [-0.5, 0.5], one row per timestamp.
Matrix calendar_features(std::span<const CalendarTime> timestamps, const MarkSpec& marks);

struct WindowBatch {
  Tensor x;        // B x T x C
  Tensor y;        // B x H x C
  Tensor x_marks;  // B x T x F
  Tensor y_marks;  // B x H x F
  std::vector<std::size_t> t_end;
  std::vector<std::size_t> window_ids;

  std::size_t size() const { return t_end.size(); }
};

/// Stride-1 sliding windows that lie entirely inside one split.
class WindowLoader {
 public:
  WindowLoader(const SeriesDataset& ds, Split split, std::size_t lookback, std::size_t horizon,
               const MarkSpec& marks, std::size_t batch_size);

  std::size_t window_count() const { return count_; }
  std::size_t batch_count() const { return (count_ + batch_size_ - 1) / batch_size_; }
  std::size_t lookback() const { return lookback_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t batch_size() const { return batch_size_; }
  const SeriesDataset& dataset() const { return *ds_; }
  const SplitRange& range() const { return range_; }

  /// Window ids grouped into batches; ascending order, or shuffled when rng is given.
  std::vector<std::vector<std::size_t>> plan(Rng* shuffle_rng) const;
  WindowBatch make_batch(std::span<const std::size_t> window_ids) const;
  /// Absolute row index of the first input step of a window.
  std::size_t window_start(std::size_t window_id) const { return range_.begin + window_id; }

 private:
  const SeriesDataset* ds_;
  SplitRange range_;
  std::size_t lookback_, horizon_, batch_size_, count_;
  Matrix marks_;
};

/// Materializes every batch of one pass over a split.
std::vector<WindowBatch> make_windows(const SeriesDataset& ds, Split split, std::size_t lookback,
                                      std::size_t horizon, const MarkSpec& marks, std::size_t batch_size,
                                      Rng& rng, bool shuffle);

struct PeriodEstimate {
  std::size_t period = 0;
  bool used_fallback = false;
  /// Channel-averaged autocorrelation; acf[l] for l in [0, max_lag + 1].
  std::vector<double> acf;
};

/// Global period from the train-split autocorrelation: the smallest strict local
/// maximum in [2, max_lag] above half the range maximum and above the 5/sqrt(n)
/// noise floor; falls back to the global argmax (with a warning) otherwise.
PeriodEstimate detect_period_acf(const SeriesDataset& ds, std::size_t max_lag);

struct SynthParams {
  std::size_t length = 6000;
  std::size_t channels = 3;
  double period = 24.0;             // seasonal period W1
  double volatility_period = 168.0;  // noise-envelope period W2
  double trend_slope = 0.0;
  double noise_base = 0.3;
  SplitRatios ratios{0.6, 0.2, 0.2};
};

/// x_t(c) = slope t + sin(2 pi t / W1 + 2 pi c / C) + noise (1 + 0.5 sin(2 pi t / W2)) eps,
/// hourly timestamps from 2016-07-01 00:00.
SeriesDataset synth_seasonal_hetero(Rng& rng, const SynthParams& params);
/// The noiseless part of the synthetic series at time t, channel c.
double synth_deterministic(const SynthParams& params, std::size_t t, std::size_t c);

}  // namespace pulse
