// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "pulse/data.hpp"
#include "pulse/model.hpp"

namespace pulse {

struct TrainConfig {
  ModelConfig model;
  double lr = 0.005;
  std::size_t epochs = 30;
  std::size_t patience = 5;
  std::size_t batch_size = 32;
  double alpha = 0.15;
  std::uint64_t seed = 2024;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
  bool per_sample_lambda = false;
  std::optional<double> force_lambda;
  std::size_t eval_threads = 1;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct DataConfig {
  std::string timestamp_column = "date";
  SplitRatios ratios{0.7, 0.1, 0.2};
  std::string marks = "HourOfDay,DayOfWeek,DayOfMonth,DayOfYear";
  /// Detect the global period from the train-split ACF instead of model.period.
  bool auto_period = false;
  std::size_t acf_max_lag = 200;

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  DataConfig data;
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

/// INI with sections [data], [model], [train], [flags]; unknown sections or keys throw ConfigError.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);
/// INI text listing every key with its effective value.
std::string to_ini(const RunConfig& cfg);

/// Compact, key-sorted JSON; the same config always yields the same text.
std::string to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

/// FNV-1a 64-bit hash of the compact JSON form, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);
/// One-line `#` header for CSV outputs: hash plus the compact config.
std::string csv_header(const RunConfig& cfg);

/// Applies PULSE_SEED from the environment when set; throws ConfigError if malformed.
void apply_seed_override(RunConfig& cfg);

}  // namespace pulse
