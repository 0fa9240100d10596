// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pulse/config.hpp"
#include "pulse/data.hpp"

namespace pulse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;

/// A configuration bound to a dataset: channel count, mark width and (when
/// requested) the detected period are filled in from the data.
struct Prepared {
  RunConfig cfg;
  SeriesDataset ds;
  MarkSpec marks;
};

Prepared prepare(const RunConfig& cfg, const std::filesystem::path& data);

/// Loads a dataset with the split and column settings recorded in a checkpoint
/// and checks that its channel count matches the model.
Prepared prepare_for_checkpoint(const RunConfig& cfg, const std::filesystem::path& data);

/// Split by name: train, val or test.
Split parse_split(const std::string& name);

/// PULSE_SEED if set, else `fallback`.
std::uint64_t effective_seed(std::uint64_t fallback);

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out_dir;
  int float_width = 64;
};
/// Writes model.ckpt, history.csv and metrics.csv under out_dir.
int cmd_train(const TrainOptions& opt);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::string split = "test";
  std::size_t season = 1;  // MASE seasonal period m
  std::filesystem::path out;
};
int cmd_eval(const EvalOptions& opt);

struct ForecastOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::string split = "test";
  std::size_t window = 0;
  std::filesystem::path out;
};
int cmd_forecast(const ForecastOptions& opt);

struct DiagnoseOptions {
  std::filesystem::path data;
  std::string timestamp_column = "date";
  SplitRatios ratios{0.7, 0.1, 0.2};
  std::size_t lookback = 96;
  std::vector<std::size_t> horizons{96, 192, 336, 720};
  std::size_t threads = 1;
  std::filesystem::path out;
};
int cmd_diagnose(const DiagnoseOptions& opt);

struct AblateOptions {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out;
};
/// One row for the full model and one per removed component.
int cmd_ablate(const AblateOptions& opt);

struct SynthOptions {
  SynthParams params;
  std::uint64_t seed = 2024;
  std::filesystem::path out;
};
int cmd_synth(const SynthOptions& opt);

struct VerifyOptions {
  std::string suite = "all";
  std::uint64_t seed = 2024;
  std::filesystem::path out;
};
/// Exit 0 when every check passes, 1 otherwise.
int cmd_verify(const VerifyOptions& opt);

struct ExportOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::string split = "test";
  std::vector<std::size_t> windows;  // empty: every window of the split
  std::filesystem::path out;
};
/// A_x and A_y per window in the model's standardized space.
int cmd_export_anchors(const ExportOptions& opt);

}  // namespace pulse::cli
