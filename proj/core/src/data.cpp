// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/data.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "pulse/error.hpp"
#include "pulse/log.hpp"
#include "pulse/ops.hpp"

namespace pulse {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::chrono::sys_days to_days(const CalendarTime& t) {
  using namespace std::chrono;
  return sys_days{year{t.year} / month{static_cast<unsigned>(t.month)} / day{static_cast<unsigned>(t.day)}};
}

}  // namespace

std::optional<CalendarTime> parse_timestamp(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DD[ T]HH:MM[:SS]
  if (text.size() < 16 || text[4] != '-' || text[7] != '-' || (text[10] != ' ' && text[10] != 'T') ||
      text[13] != ':') {
    return std::nullopt;
  }
  CalendarTime t;
  if (!parse_int(text.substr(0, 4), t.year) || !parse_int(text.substr(5, 2), t.month) ||
      !parse_int(text.substr(8, 2), t.day) || !parse_int(text.substr(11, 2), t.hour) ||
      !parse_int(text.substr(14, 2), t.minute)) {
    return std::nullopt;
  }
  if (text.size() > 16) {
    if (text.size() < 19 || text[16] != ':' || !parse_int(text.substr(17, 2), t.second)) return std::nullopt;
    // Fractional seconds are tolerated and ignored.
    if (text.size() > 19 && text[19] != '.') return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{t.year}, month{static_cast<unsigned>(t.month)}, day{static_cast<unsigned>(t.day)}};
  if (!ymd.ok() || t.hour < 0 || t.hour > 23 || t.minute < 0 || t.minute > 59 || t.second < 0 || t.second > 59) {
    return std::nullopt;
  }
  return t;
}

std::string format_timestamp(const CalendarTime& t) {
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}:{:02d}", t.year, t.month, t.day, t.hour, t.minute,
                     t.second);
}

CalendarTime add_minutes(const CalendarTime& t, long long minutes) {
  using namespace std::chrono;
  const long long base = static_cast<long long>(to_days(t).time_since_epoch().count()) * 1440 +
                         t.hour * 60 + t.minute + minutes;
  const long long days = base >= 0 ? base / 1440 : (base - 1439) / 1440;
  const long long rem = base - days * 1440;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  CalendarTime out;
  out.year = static_cast<int>(ymd.year());
  out.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
  out.day = static_cast<int>(static_cast<unsigned>(ymd.day()));
  out.hour = static_cast<int>(rem / 60);
  out.minute = static_cast<int>(rem % 60);
  out.second = t.second;
  return out;
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "?";
}

SeriesDataset make_dataset(std::string name, std::vector<std::string> channel_names,
                           std::vector<CalendarTime> timestamps, Matrix raw, SplitRatios ratios) {
  if (raw.cols == 0) throw DataError("dataset has no numeric channels");
  if (timestamps.size() != raw.rows) {
    throw DataError(fmt::format("{} timestamps for {} rows", timestamps.size(), raw.rows));
  }
  if (!(ratios.train > 0.0) || ratios.val < 0.0 || !(ratios.test > 0.0) ||
      ratios.train + ratios.val + ratios.test > 1.0 + 1e-9) {
    throw DataError(fmt::format("invalid split ratios ({}, {}, {})", ratios.train, ratios.val, ratios.test));
  }
  check_finite(raw.data, name.c_str());

  SeriesDataset ds;
  ds.name = std::move(name);
  ds.channel_names = std::move(channel_names);
  ds.timestamps = std::move(timestamps);
  ds.ratios = ratios;

  const std::size_t n = raw.rows;
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.train + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios.test + 1e-9));
  if (n_train + n_test > n || n_train < 2 || n_test == 0) {
    throw DataError(fmt::format("{} rows are insufficient for split ratios ({}, {}, {})", n, ratios.train,
                                ratios.val, ratios.test));
  }
  const std::size_t n_val = n - n_train - n_test;
  ds.splits[0] = {0, n_train};
  ds.splits[1] = {n_train, n_train + n_val};
  ds.splits[2] = {n_train + n_val, n};

  const std::size_t c_count = raw.cols;
  ds.train_mean.assign(c_count, 0.0);
  ds.train_std.assign(c_count, 1.0);
  for (std::size_t c = 0; c < c_count; ++c) {
    double mu = 0.0;
    for (std::size_t t = 0; t < n_train; ++t) mu += raw(t, c);
    mu /= static_cast<double>(n_train);
    double var = 0.0;
    for (std::size_t t = 0; t < n_train; ++t) var += (raw(t, c) - mu) * (raw(t, c) - mu);
    var /= static_cast<double>(n_train);
    double sd = std::sqrt(var);
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mu)))) {
      const auto label = c < ds.channel_names.size() ? ds.channel_names[c] : std::to_string(c);
      warn(fmt::format("{}: channel '{}' is constant on the train split; using std 1", ds.name, label));
      sd = 1.0;
    }
    ds.train_mean[c] = mu;
    ds.train_std[c] = sd;
  }
  ds.values = Matrix(n, c_count);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < c_count; ++c) ds.values(t, c) = (raw(t, c) - ds.train_mean[c]) / ds.train_std[c];
  }
  ds.raw = std::move(raw);
  return ds;
}

SeriesDataset read_csv(std::istream& in, std::string name, std::string_view timestamp_column,
                       SplitRatios ratios) {
  std::string line;
  std::size_t row = 0;
  // Leading '#' lines carry provenance headers and are skipped.
  do {
    if (!std::getline(in, line)) throw DataError(fmt::format("{}: empty file", name));
    ++row;
  } while (!line.empty() && line.front() == '#');
  const auto header = split_fields(line);
  std::size_t ts_col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == timestamp_column) ts_col = i;
  }
  if (ts_col == header.size()) {
    throw DataError(fmt::format("{}: timestamp column '{}' not found", name, timestamp_column));
  }
  std::vector<std::string> channel_names;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i != ts_col) channel_names.emplace_back(header[i]);
  }
  if (channel_names.empty()) throw DataError(fmt::format("{}: no numeric columns", name));

  std::vector<CalendarTime> stamps;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError(fmt::format("{}: row {} has {} fields, expected {}", name, row, fields.size(), header.size()));
    }
    auto ts = parse_timestamp(fields[ts_col]);
    if (!ts) {
      throw DataError(fmt::format("{}: row {} column '{}': cannot parse timestamp '{}'", name, row,
                                  timestamp_column, fields[ts_col]));
    }
    if (!stamps.empty() && !(stamps.back() < *ts)) {
      throw DataError(fmt::format("{}: row {}: timestamps are not strictly increasing", name, row));
    }
    stamps.push_back(*ts);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == ts_col) continue;
      const auto f = fields[i];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw DataError(fmt::format("{}: row {} column '{}': invalid or missing value '{}'", name, row, header[i], f));
      }
      values.push_back(v);
    }
  }
  Matrix raw;
  raw.rows = stamps.size();
  raw.cols = channel_names.size();
  raw.data = std::move(values);
  return make_dataset(std::move(name), std::move(channel_names), std::move(stamps), std::move(raw), ratios);
}

SeriesDataset load_csv(const std::filesystem::path& path, std::string_view timestamp_column, SplitRatios ratios) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return read_csv(in, path.stem().string(), timestamp_column, ratios);
}

void write_csv(std::ostream& out, const SeriesDataset& ds) {
  out << "date";
  for (const auto& name : ds.channel_names) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < ds.length(); ++t) {
    out << format_timestamp(ds.timestamps[t]);
    for (std::size_t c = 0; c < ds.channels(); ++c) out << ',' << fmt::format("{:.17g}", ds.raw(t, c));
    out << '\n';
  }
}

MarkSpec parse_mark_spec(std::string_view text) {
  MarkSpec spec;
  text = trim(text);
  if (text.empty() || text == "none") return spec;
  for (auto field : split_fields(text)) {
    if (field == "MinuteOfHour") {
      spec.features.push_back(CalendarFeature::MinuteOfHour);
    } else if (field == "HourOfDay") {
      spec.features.push_back(CalendarFeature::HourOfDay);
    } else if (field == "DayOfWeek") {
      spec.features.push_back(CalendarFeature::DayOfWeek);
    } else if (field == "DayOfMonth") {
      spec.features.push_back(CalendarFeature::DayOfMonth);
    } else if (field == "DayOfYear") {
      spec.features.push_back(CalendarFeature::DayOfYear);
    } else {
      throw ConfigError(fmt::format("unknown calendar feature '{}'", field));
    }
  }
  return spec;
}

std::string to_string(const MarkSpec& marks) {
  std::vector<std::string_view> names;
  for (auto f : marks.features) {
    switch (f) {
      case CalendarFeature::MinuteOfHour:
        names.emplace_back("MinuteOfHour");
        break;
      case CalendarFeature::HourOfDay:
        names.emplace_back("HourOfDay");
        break;
      case CalendarFeature::DayOfWeek:
        names.emplace_back("DayOfWeek");
        break;
      case CalendarFeature::DayOfMonth:
        names.emplace_back("DayOfMonth");
        break;
      case CalendarFeature::DayOfYear:
        names.emplace_back("DayOfYear");
        break;
    }
  }
  return names.empty() ? std::string("none") : fmt::format("{}", fmt::join(names, ","));
}

Matrix calendar_features(std::span<const CalendarTime> timestamps, const MarkSpec& marks) {
  using namespace std::chrono;
  Matrix out(timestamps.size(), marks.size());
  for (std::size_t r = 0; r < timestamps.size(); ++r) {
    const auto& t = timestamps[r];
    const auto days = to_days(t);
    for (std::size_t f = 0; f < marks.size(); ++f) {
      double v = 0.0;
      switch (marks.features[f]) {
        case CalendarFeature::MinuteOfHour:
          v = t.minute / 59.0 - 0.5;
          break;
        case CalendarFeature::HourOfDay:
          v = t.hour / 23.0 - 0.5;
          break;
        case CalendarFeature::DayOfWeek:
          v = static_cast<double>(weekday{days}.iso_encoding() - 1) / 6.0 - 0.5;
          break;
        case CalendarFeature::DayOfMonth:
          v = (t.day - 1) / 30.0 - 0.5;
          break;
        case CalendarFeature::DayOfYear: {
          const auto jan1 = sys_days{year{t.year} / January / 1};
          v = static_cast<double>((days - jan1).count()) / 365.0 - 0.5;
          break;
        }
      }
      out(r, f) = v;
    }
  }
  return out;
}

WindowLoader::WindowLoader(const SeriesDataset& ds, Split split, std::size_t lookback, std::size_t horizon,
                           const MarkSpec& marks, std::size_t batch_size)
    : ds_(&ds), range_(ds.range(split)), lookback_(lookback), horizon_(horizon), batch_size_(batch_size) {
  if (lookback == 0 || horizon == 0 || batch_size == 0) {
    throw DataError("window lookback, horizon and batch size must be positive");
  }
  if (lookback + horizon > range_.size()) {
    throw DataError(fmt::format("{} split of '{}' has {} rows; T + H = {} does not fit", split_name(split), ds.name,
                                range_.size(), lookback + horizon));
  }
  count_ = range_.size() - lookback - horizon + 1;
  marks_ = calendar_features(std::span(ds.timestamps).subspan(range_.begin, range_.size()), marks);
}

std::vector<std::vector<std::size_t>> WindowLoader::plan(Rng* shuffle_rng) const {
  std::vector<std::size_t> order;
  if (shuffle_rng != nullptr) {
    order = shuffle_rng->permutation(count_);
  } else {
    order.resize(count_);
    for (std::size_t i = 0; i < count_; ++i) order[i] = i;
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < count_; i += batch_size_) {
    const auto end = std::min(count_, i + batch_size_);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

WindowBatch WindowLoader::make_batch(std::span<const std::size_t> window_ids) const {
  const std::size_t b = window_ids.size();
  const std::size_t c = ds_->channels();
  const std::size_t f = marks_.cols;
  std::vector<double> x(b * lookback_ * c), y(b * horizon_ * c), xm(b * lookback_ * f), ym(b * horizon_ * f);
  WindowBatch batch;
  batch.window_ids.assign(window_ids.begin(), window_ids.end());
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t w = window_ids[i];
    if (w >= count_) throw DataError(fmt::format("window {} out of range [0, {})", w, count_));
    const std::size_t start = range_.begin + w;
    std::copy_n(ds_->values.data.data() + start * c, lookback_ * c, x.data() + i * lookback_ * c);
    std::copy_n(ds_->values.data.data() + (start + lookback_) * c, horizon_ * c, y.data() + i * horizon_ * c);
    std::copy_n(marks_.data.data() + w * f, lookback_ * f, xm.data() + i * lookback_ * f);
    std::copy_n(marks_.data.data() + (w + lookback_) * f, horizon_ * f, ym.data() + i * horizon_ * f);
    batch.t_end.push_back(start + lookback_ - 1);
  }
  batch.x = Tensor({b, lookback_, c}, std::move(x));
  batch.y = Tensor({b, horizon_, c}, std::move(y));
  batch.x_marks = Tensor({b, lookback_, f}, std::move(xm));
  batch.y_marks = Tensor({b, horizon_, f}, std::move(ym));
  return batch;
}

std::vector<WindowBatch> make_windows(const SeriesDataset& ds, Split split, std::size_t lookback,
                                      std::size_t horizon, const MarkSpec& marks, std::size_t batch_size,
                                      Rng& rng, bool shuffle) {
  WindowLoader loader(ds, split, lookback, horizon, marks, batch_size);
  std::vector<WindowBatch> out;
  for (const auto& ids : loader.plan(shuffle ? &rng : nullptr)) out.push_back(loader.make_batch(ids));
  return out;
}

PeriodEstimate detect_period_acf(const SeriesDataset& ds, std::size_t max_lag) {
  const auto& train = ds.range(Split::Train);
  const std::size_t n = train.size();
  if (max_lag < 2 || n <= 2 * max_lag) {
    throw DataError(fmt::format("ACF needs max_lag >= 2 and train length > 2 * max_lag (n={}, max_lag={})", n, max_lag));
  }
  PeriodEstimate est;
  est.acf.assign(max_lag + 2, 0.0);
  std::size_t used = 0;
  for (std::size_t c = 0; c < ds.channels(); ++c) {
    double mu = 0.0;
    for (std::size_t t = 0; t < n; ++t) mu += ds.values(train.begin + t, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double d = ds.values(train.begin + t, c) - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    if (var <= 1e-24) continue;
    ++used;
    for (std::size_t lag = 0; lag <= max_lag + 1; ++lag) {
      double s = 0.0;
      for (std::size_t t = 0; t + lag < n; ++t) {
        s += (ds.values(train.begin + t, c) - mu) * (ds.values(train.begin + t + lag, c) - mu);
      }
      est.acf[lag] += s / (static_cast<double>(n - lag) * var);
    }
  }
  if (used == 0) throw DataError(fmt::format("{}: every channel is constant; no period to detect", ds.name));
  for (auto& v : est.acf) v /= static_cast<double>(used);

  double peak = -1.0;
  std::size_t argmax = 2;
  for (std::size_t lag = 2; lag <= max_lag; ++lag) {
    if (est.acf[lag] > peak) {
      peak = est.acf[lag];
      argmax = lag;
    }
  }
  const double floor = std::max(0.5 * peak, 5.0 / std::sqrt(static_cast<double>(n)));
  for (std::size_t lag = 2; lag <= max_lag; ++lag) {
    const double r = est.acf[lag];
    if (r > est.acf[lag - 1] && r > est.acf[lag + 1] && r > floor) {
      est.period = lag;
      return est;
    }
  }
  warn(fmt::format("{}: no significant autocorrelation peak in [2, {}]; using argmax lag {}", ds.name, max_lag, argmax));
  est.period = argmax;
  est.used_fallback = true;
  return est;
}

double synth_deterministic(const SynthParams& p, std::size_t t, std::size_t c) {
  const double phase = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(p.channels);
  return p.trend_slope * static_cast<double>(t) +
         std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p.period + phase);
}

SeriesDataset synth_seasonal_hetero(Rng& rng, const SynthParams& p) {
  if (p.channels == 0 || !(p.period > 0.0) || !(p.volatility_period > 0.0)) {
    throw DataError("synthetic series needs positive channel count and periods");
  }
  if (static_cast<double>(p.length) < 4.0 * std::max(p.period, p.volatility_period)) {
    throw DataError(fmt::format("synthetic length {} is shorter than 4 * max(W1, W2)", p.length));
  }
  Matrix raw(p.length, p.channels);
  std::vector<CalendarTime> stamps(p.length);
  const CalendarTime epoch{2016, 7, 1, 0, 0, 0};
  for (std::size_t t = 0; t < p.length; ++t) {
    stamps[t] = add_minutes(epoch, static_cast<long long>(t) * 60);
    const double envelope =
        1.0 + 0.5 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / p.volatility_period);
    for (std::size_t c = 0; c < p.channels; ++c) {
      const double eps = rng.normal();
      raw(t, c) = synth_deterministic(p, t, c) + p.noise_base * envelope * eps;
    }
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < p.channels; ++c) names.push_back(fmt::format("ch{}", c));
  return make_dataset("synthetic", std::move(names), std::move(stamps), std::move(raw), p.ratios);
}

}  // namespace pulse
