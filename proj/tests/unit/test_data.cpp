// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pulse/data.hpp"
#include "pulse/error.hpp"
#include "test_util.hpp"

namespace pulse {
namespace {

using test::function_dataset;
using test::WarningCapture;

std::string small_csv(std::size_t rows) {
  std::ostringstream out;
  out << "date,a,b\n";
  const auto ts = test::hourly(rows);
  for (std::size_t i = 0; i < rows; ++i) out << format_timestamp(ts[i]) << "," << i << "," << 0.5 * i * i << "\n";
  return out.str();
}

TEST(Timestamp, ParseFormatAndRollover) {
  const auto t = parse_timestamp("2016-07-01 00:00:00");
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(*t, (CalendarTime{2016, 7, 1, 0, 0, 0}));
  EXPECT_EQ(parse_timestamp("2016-07-01T13:45"), (CalendarTime{2016, 7, 1, 13, 45, 0}));
  EXPECT_FALSE(parse_timestamp("yesterday").has_value());
  EXPECT_FALSE(parse_timestamp("2016-13-01 00:00").has_value());
  EXPECT_EQ(add_minutes({2016, 12, 31, 23, 30, 0}, 45), (CalendarTime{2017, 1, 1, 0, 15, 0}));
  EXPECT_EQ(add_minutes({2016, 2, 28, 23, 0, 0}, 60), (CalendarTime{2016, 2, 29, 0, 0, 0}));
  EXPECT_EQ(add_minutes({2015, 2, 28, 23, 0, 0}, 60), (CalendarTime{2015, 3, 1, 0, 0, 0}));
}

TEST(Csv, SplitsFollowRatios) {
  std::istringstream in(small_csv(100));
  const auto ds = read_csv(in, "small", "date", {0.7, 0.1, 0.2});
  EXPECT_EQ(ds.range(Split::Train).size(), 70u);
  EXPECT_EQ(ds.range(Split::Val).size(), 10u);
  EXPECT_EQ(ds.range(Split::Test).size(), 20u);
  EXPECT_EQ(ds.range(Split::Train).begin, 0u);
  EXPECT_EQ(ds.range(Split::Val).begin, 70u);
  EXPECT_EQ(ds.range(Split::Test).end, 100u);
  EXPECT_EQ(ds.channel_names, (std::vector<std::string>{"a", "b"}));
}

TEST(Csv, RoundTripThroughWriter) {
  std::istringstream in(small_csv(50));
  const auto ds = read_csv(in, "small");
  std::ostringstream out;
  write_csv(out, ds);
  std::istringstream again(out.str());
  const auto back = read_csv(again, "small");
  EXPECT_EQ(back.raw.data, ds.raw.data);
  EXPECT_EQ(back.timestamps, ds.timestamps);
}

TEST(Csv, SkipsLeadingCommentLines) {
  std::istringstream in("# produced by a generator\n# second line\n" + small_csv(30));
  EXPECT_EQ(read_csv(in, "c").length(), 30u);
}

TEST(Csv, RejectsMalformedInput) {
  std::istringstream bad_number("date,a\n2016-07-01 00:00,1\n2016-07-01 01:00,abc\n");
  EXPECT_THROW(read_csv(bad_number, "x"), DataError);
  std::istringstream missing("date,a\n2016-07-01 00:00,1\n2016-07-01 01:00,\n");
  EXPECT_THROW(read_csv(missing, "x"), DataError);
  std::istringstream not_monotone("date,a\n2016-07-01 01:00,1\n2016-07-01 00:00,2\n");
  EXPECT_THROW(read_csv(not_monotone, "x"), DataError);
  std::istringstream no_channels("date\n2016-07-01 00:00\n");
  EXPECT_THROW(read_csv(no_channels, "x"), DataError);
  std::istringstream wrong_column("time,a\n2016-07-01 00:00,1\n");
  EXPECT_THROW(read_csv(wrong_column, "x"), DataError);
  std::istringstream ragged("date,a,b\n2016-07-01 00:00,1\n");
  EXPECT_THROW(read_csv(ragged, "x"), DataError);
  EXPECT_THROW(load_csv("/nonexistent/file.csv"), DataError);
}

TEST(ZScore, TrainStatisticsOnly) {
  // Train split (first 70 rows) alternates 3 and 7: mean 5, std 2.
  const auto ds = function_dataset(100, 1, [](std::size_t t, std::size_t) { return t < 70 ? (t % 2 ? 7.0 : 3.0) : 9.0; });
  EXPECT_NEAR(ds.train_mean[0], 5.0, 1e-12);
  EXPECT_NEAR(ds.train_std[0], 2.0, 1e-8);
  EXPECT_NEAR(ds.values(80, 0), 2.0, 1e-8);
}

TEST(ZScore, TrainSplitIsStandardized) {
  Rng rng(3);
  const auto ds = function_dataset(500, 3, [&](std::size_t t, std::size_t c) { return 10.0 * c + std::sin(0.1 * t) + rng.normal(); });
  for (std::size_t c = 0; c < 3; ++c) {
    double s1 = 0.0, s2 = 0.0;
    const auto& r = ds.range(Split::Train);
    for (std::size_t t = r.begin; t < r.end; ++t) s1 += ds.values(t, c);
    const double m = s1 / r.size();
    for (std::size_t t = r.begin; t < r.end; ++t) s2 += (ds.values(t, c) - m) * (ds.values(t, c) - m);
    EXPECT_NEAR(m, 0.0, 1e-10);
    EXPECT_NEAR(std::sqrt(s2 / r.size()), 1.0, 1e-8);
  }
}

TEST(ZScore, ConstantChannelWarnsAndZeroes) {
  WarningCapture warnings;
  const auto ds = function_dataset(100, 2, [](std::size_t t, std::size_t c) { return c == 0 ? 4.0 : double(t); });
  ASSERT_EQ(warnings.messages.size(), 1u);
  EXPECT_EQ(ds.train_std[0], 1.0);
  for (std::size_t t = 0; t < 100; ++t) EXPECT_EQ(ds.values(t, 0), 0.0);
}

TEST(Calendar, FeatureEndpointsAndKnownWeekday) {
  const MarkSpec marks = parse_mark_spec("HourOfDay,DayOfWeek,MinuteOfHour,DayOfMonth,DayOfYear");
  ASSERT_EQ(marks.size(), 5u);
  // 2016-07-04 was a Monday; 2016-07-01 a Friday.
  const std::vector<CalendarTime> ts{{2016, 7, 4, 0, 0, 0}, {2016, 7, 1, 23, 59, 0}, {2016, 1, 1, 0, 0, 0},
                                     {2016, 12, 31, 12, 30, 0}};
  const Matrix f = calendar_features(ts, marks);
  EXPECT_DOUBLE_EQ(f(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(f(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(f(0, 1), -0.5);
  EXPECT_NEAR(f(1, 1), 4.0 / 6.0 - 0.5, 1e-15);
  EXPECT_DOUBLE_EQ(f(1, 2), 0.5);
  EXPECT_DOUBLE_EQ(f(2, 3), -0.5);
  EXPECT_DOUBLE_EQ(f(2, 4), -0.5);
  EXPECT_NEAR(f(3, 4), 365.0 / 365.0 - 0.5, 1e-15);  // leap year, day 366
  for (double v : calendar_features(test::hourly(2000), marks).data) {
    EXPECT_GE(v, -0.5);
    EXPECT_LE(v, 0.5);
  }
}

TEST(Calendar, MarkSpecParsing) {
  EXPECT_EQ(parse_mark_spec("").size(), 0u);
  EXPECT_EQ(to_string(parse_mark_spec("HourOfDay,DayOfWeek")), "HourOfDay,DayOfWeek");
  EXPECT_THROW(parse_mark_spec("HourOfDay,Fortnight"), ConfigError);
}

TEST(Windows, CountAndOrientation) {
  const auto ds = function_dataset(1000, 2, [](std::size_t t, std::size_t c) { return double(t) + 0.5 * c; });
  const MarkSpec marks = parse_mark_spec("HourOfDay");
  WindowLoader test(ds, Split::Test, 96, 96, marks, 4);
  EXPECT_EQ(test.range().size(), 200u);
  EXPECT_EQ(test.window_count(), 9u);
  EXPECT_EQ(test.batch_count(), 3u);
  const auto plan = test.plan(nullptr);
  const WindowBatch b = test.make_batch(plan.front());
  EXPECT_EQ(b.t_end.front(), test.range().begin + 95);
  EXPECT_EQ(b.x.shape(), (Shape{4, 96, 2}));
  EXPECT_EQ(b.y.shape(), (Shape{4, 96, 2}));
  EXPECT_EQ(b.x_marks.shape(), (Shape{4, 96, 1}));
  // Y follows X directly: the series is a ramp in raw space.
  const double step = 1.0 / ds.train_std[0];
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double last_x = b.x[(i * 96 + 95) * 2];
    const double first_y = b.y[(i * 96) * 2];
    EXPECT_NEAR(first_y - last_x, step, 1e-9);
    EXPECT_NEAR(last_x, ds.values(b.t_end[i], 0), 0.0);
  }
}

TEST(Windows, CountFormulaAcrossFixtures) {
  const auto ds = function_dataset(700, 1, [](std::size_t t, std::size_t) { return std::sin(0.3 * t); });
  for (Split s : {Split::Train, Split::Val, Split::Test}) {
    for (std::size_t lookback : {1u, 12u, 48u}) {
      for (std::size_t horizon : {1u, 24u}) {
        const std::size_t n = ds.range(s).size();
        if (n < lookback + horizon) {
          EXPECT_THROW(WindowLoader(ds, s, lookback, horizon, {}, 8), DataError);
          continue;
        }
        WindowLoader w(ds, s, lookback, horizon, {}, 8);
        EXPECT_EQ(w.window_count(), n - lookback - horizon + 1);
        std::size_t total = 0;
        for (const auto& ids : w.plan(nullptr)) total += ids.size();
        EXPECT_EQ(total, w.window_count());
      }
    }
  }
}

TEST(Windows, ShuffleIsSeededPermutation) {
  const auto ds = function_dataset(600, 1, [](std::size_t t, std::size_t) { return std::cos(0.2 * t); });
  auto collect = [&](std::uint64_t seed) {
    Rng rng(seed);
    const auto batches = make_windows(ds, Split::Train, 24, 12, {}, 16, rng, true);
    std::vector<std::size_t> order;
    for (const auto& b : batches) order.insert(order.end(), b.t_end.begin(), b.t_end.end());
    return order;
  };
  const auto a = collect(9), b = collect(9), c = collect(10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], 23 + i);
}

// Brute-force channel-averaged autocorrelation on the train split and the
// smallest strict local maximum above half the range maximum.
std::vector<double> acf_oracle(const SeriesDataset& ds, std::size_t max_lag) {
  const auto& r = ds.range(Split::Train);
  const std::size_t n = r.size();
  std::vector<double> acf(max_lag + 2, 0.0);
  for (std::size_t c = 0; c < ds.channels(); ++c) {
    double mu = 0.0, var = 0.0;
    for (std::size_t t = r.begin; t < r.end; ++t) mu += ds.raw(t, c);
    mu /= n;
    for (std::size_t t = r.begin; t < r.end; ++t) var += (ds.raw(t, c) - mu) * (ds.raw(t, c) - mu);
    var /= n;
    for (std::size_t l = 0; l < acf.size(); ++l) {
      double s = 0.0;
      for (std::size_t t = r.begin; t + l < r.end; ++t) s += (ds.raw(t, c) - mu) * (ds.raw(t + l, c) - mu);
      acf[l] += s / ((n - l) * var) / ds.channels();
    }
  }
  return acf;
}

std::size_t peak_oracle(const std::vector<double>& acf, std::size_t max_lag) {
  double top = -1e300;
  for (std::size_t l = 2; l <= max_lag; ++l) top = std::max(top, acf[l]);
  for (std::size_t l = 2; l <= max_lag; ++l) {
    if (acf[l] > acf[l - 1] && acf[l] > acf[l + 1] && acf[l] > 0.5 * top) return l;
  }
  return 0;
}

TEST(Period, PureSinusoid) {
  const auto ds = function_dataset(600, 1, [](std::size_t t, std::size_t) { return std::sin(2 * std::numbers::pi * t / 24.0); },
                                   {0.8, 0.1, 0.1});
  ASSERT_EQ(ds.range(Split::Train).size(), 480u);
  const auto est = detect_period_acf(ds, 100);
  const auto oracle = acf_oracle(ds, 100);
  ASSERT_EQ(est.acf.size(), oracle.size());
  for (std::size_t l = 0; l < oracle.size(); ++l) EXPECT_NEAR(est.acf[l], oracle[l], 1e-9) << l;
  EXPECT_EQ(peak_oracle(oracle, 100), 24u);
  EXPECT_EQ(est.period, 24u);
  EXPECT_FALSE(est.used_fallback);
}

TEST(Period, PrefersFundamentalOverSlowComponent) {
  const auto ds = function_dataset(
      2500, 2,
      [](std::size_t t, std::size_t) {
        return std::sin(2 * std::numbers::pi * t / 24.0) + 0.3 * std::sin(2 * std::numbers::pi * t / 168.0);
      },
      {0.8, 0.1, 0.1});
  const auto est = detect_period_acf(ds, 200);
  EXPECT_EQ(peak_oracle(acf_oracle(ds, 200), 200), 24u);
  EXPECT_EQ(est.period, 24u);
}

TEST(Period, WhiteNoiseFallsBack) {
  Rng rng(77);
  const auto ds = function_dataset(3000, 1, [&](std::size_t, std::size_t) { return rng.normal(); });
  WarningCapture warnings;
  const auto est = detect_period_acf(ds, 100);
  EXPECT_TRUE(est.used_fallback);
  EXPECT_EQ(warnings.messages.size(), 1u);
  EXPECT_GE(est.period, 2u);
  EXPECT_LE(est.period, 100u);
}

TEST(Period, RejectsShortOrConstantSeries) {
  const auto ramp = function_dataset(100, 1, [](std::size_t t, std::size_t) { return double(t % 7); });
  EXPECT_THROW(detect_period_acf(ramp, 50), DataError);
  WarningCapture quiet;
  const auto flat = function_dataset(1000, 1, [](std::size_t, std::size_t) { return 1.0; });
  EXPECT_THROW(detect_period_acf(flat, 50), DataError);
}

TEST(Synth, NoiselessSeriesIsDeterministicPart) {
  SynthParams p;
  p.length = 1000;
  p.noise_base = 0.0;
  p.trend_slope = 0.01;
  Rng rng(1);
  const auto ds = synth_seasonal_hetero(rng, p);
  for (std::size_t t = 0; t < p.length; ++t)
    for (std::size_t c = 0; c < p.channels; ++c) ASSERT_EQ(ds.raw(t, c), synth_deterministic(p, t, c));
  EXPECT_EQ(ds.timestamps.front(), (CalendarTime{2016, 7, 1, 0, 0, 0}));
  EXPECT_EQ(ds.timestamps[25], (CalendarTime{2016, 7, 2, 1, 0, 0}));
}

TEST(Synth, SeededAndBitwiseRepeatable) {
  SynthParams p;
  p.length = 800;
  Rng a(5), b(5), c(6);
  const auto da = synth_seasonal_hetero(a, p), db = synth_seasonal_hetero(b, p), dc = synth_seasonal_hetero(c, p);
  EXPECT_EQ(da.raw.data, db.raw.data);
  EXPECT_NE(da.raw.data, dc.raw.data);
}

TEST(Synth, NoiseEnvelopeFollowsVolatilityPeriod) {
  SynthParams p;
  p.length = 168 * 200;
  p.channels = 1;
  Rng rng(8);
  const auto ds = synth_seasonal_hetero(rng, p);
  // Residual variance near the envelope peak (t mod 168 = 42) vs trough (126).
  double peak = 0.0, trough = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < 200; ++k) {
    const std::size_t tp = 168 * k + 42, tt = 168 * k + 126;
    peak += std::pow(ds.raw(tp, 0) - synth_deterministic(p, tp, 0), 2);
    trough += std::pow(ds.raw(tt, 0) - synth_deterministic(p, tt, 0), 2);
    ++n;
  }
  EXPECT_NEAR(peak / n / (trough / n), 9.0, 3.0);  // (1.5 / 0.5)^2
}

TEST(Synth, NoiselessSeriesRecoversSeasonalPeriod) {
  SynthParams p;
  p.length = 2000;
  p.noise_base = 0.0;
  Rng rng(1);
  EXPECT_EQ(detect_period_acf(synth_seasonal_hetero(rng, p), 200).period, 24u);
}

TEST(Synth, RejectsTooShortSeries) {
  SynthParams p;
  p.length = 600;  // < 4 * 168
  Rng rng(1);
  EXPECT_THROW(synth_seasonal_hetero(rng, p), DataError);
}

}  // namespace
}  // namespace pulse
