// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pulse/commands.hpp"
#include "pulse/error.hpp"
#include "pulse/train.hpp"

namespace pulse::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t count(const std::string& s, char c) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), c)); }

constexpr const char* kTinyConfig =
    "[data]\ntrain_ratio = 0.6\nval_ratio = 0.2\ntest_ratio = 0.2\nmarks = HourOfDay,DayOfWeek\n"
    "[model]\nlookback = 24\nhorizon = 12\nperiod = 24\ncodebook_size = 24\npatch = 6\n"
    "d_router = 4\nd_backbone = 16\nd_time = 4\n"
    "[train]\nepochs = 2\nbatch_size = 16\n";

// One synthetic CSV, one config and one trained checkpoint shared by the suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "pulse_cli_unit";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    SynthOptions s;
    s.params.length = 600;
    s.params.channels = 2;
  s.params.volatility_period = 48;
    s.seed = 5;
    s.out = dir_ / "synth.csv";
    ASSERT_EQ(cmd_synth(s), kExitOk);
    std::ofstream(dir_ / "tiny.ini") << kTinyConfig;
    TrainOptions t{dir_ / "tiny.ini", dir_ / "synth.csv", dir_ / "run", 64};
    ASSERT_EQ(cmd_train(t), kExitOk);
  }

  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, SynthWritesHeaderAndColumns) {
  const auto lines = lines_of(dir_ / "synth.csv");
  ASSERT_EQ(lines.size(), 602u);
  EXPECT_EQ(lines[0].rfind("# synth seed=5 length=600 channels=2", 0), 0u);
  EXPECT_EQ(count(lines[1], ','), 2u);
  EXPECT_EQ(lines[1].substr(0, 4), "date");
}

TEST_F(CliTest, TrainWritesArtifacts) {
  for (const char* name : {"model.ckpt", "history.csv", "metrics.csv"}) EXPECT_TRUE(fs::exists(dir_ / "run" / name));
  const auto metrics = lines_of(dir_ / "run" / "metrics.csv");
  ASSERT_EQ(metrics.size(), 4u);
  EXPECT_EQ(metrics[0].substr(0, 2), "# ");
  EXPECT_EQ(metrics[1], "split,mse,mae,windows,best_epoch");
  EXPECT_EQ(metrics[2].substr(0, 4), "val,");
  EXPECT_EQ(metrics[3].substr(0, 5), "test,");
  const auto history = lines_of(dir_ / "run" / "history.csv");
  EXPECT_EQ(history.size(), 2u + 2u);  // header, columns, two epochs
}

TEST_F(CliTest, EvalMatchesTrainingMetrics) {
  EvalOptions e;
  e.checkpoint = dir_ / "run" / "model.ckpt";
  e.data = dir_ / "synth.csv";
  e.out = dir_ / "eval.csv";
  ASSERT_EQ(cmd_eval(e), kExitOk);
  const auto lines = lines_of(e.out);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[1], "split,mse,mae,mase,season,windows");
  // Test MSE and MAE agree with metrics.csv written by train.
  const auto metrics = lines_of(dir_ / "run" / "metrics.csv");
  const std::string test_row = metrics[3].substr(5);
  const std::string eval_row = lines[2].substr(5);
  const auto prefix = [](const std::string& s) { return s.substr(0, s.find(',', s.find(',') + 1)); };
  EXPECT_EQ(prefix(eval_row), prefix(test_row));
  std::istringstream row(lines[2]);
  std::string split, mse, mae, mase_text;
  std::getline(row, split, ',');
  std::getline(row, mse, ',');
  std::getline(row, mae, ',');
  std::getline(row, mase_text, ',');
  EXPECT_GT(std::stod(mase_text), 0.0);
  EXPECT_TRUE(std::isfinite(std::stod(mase_text)));
}

TEST_F(CliTest, ForecastRowsPerStepAndChannel) {
  ForecastOptions f;
  f.checkpoint = dir_ / "run" / "model.ckpt";
  f.data = dir_ / "synth.csv";
  f.window = 3;
  f.out = dir_ / "forecast.csv";
  ASSERT_EQ(cmd_forecast(f), kExitOk);
  const auto lines = lines_of(f.out);
  EXPECT_EQ(lines.size(), 2u + 12u * 2u);
  EXPECT_EQ(lines[1], "step,channel,prediction,ground_truth,anchor_y");
  f.window = 100000;
  EXPECT_THROW(cmd_forecast(f), ConfigError);
  f.window = 0;
  f.split = "holdout";
  EXPECT_THROW(cmd_forecast(f), ConfigError);
}

TEST_F(CliTest, ExportAnchorsSelectedWindows) {
  ExportOptions x;
  x.checkpoint = dir_ / "run" / "model.ckpt";
  x.data = dir_ / "synth.csv";
  x.windows = {0, 2};
  x.out = dir_ / "anchors.csv";
  ASSERT_EQ(cmd_export_anchors(x), kExitOk);
  const auto lines = lines_of(x.out);
  EXPECT_EQ(lines[1], "window,segment,step,channel,anchor");
  EXPECT_EQ(lines.size(), 2u + 2u * (24u + 12u) * 2u);
  EXPECT_EQ(lines[2].substr(0, 10), "0,history,");
  EXPECT_EQ(lines.back().substr(0, 9), "2,future,");
  x.windows = {9999};
  EXPECT_THROW(cmd_export_anchors(x), ConfigError);
}

TEST_F(CliTest, CheckpointAgainstWrongDataIsDataError) {
  SynthOptions s;
  s.params.length = 600;
  s.params.channels = 3;
  s.params.volatility_period = 48;
  s.out = dir_ / "three.csv";
  ASSERT_EQ(cmd_synth(s), kExitOk);
  EvalOptions e;
  e.checkpoint = dir_ / "run" / "model.ckpt";
  e.data = s.out;
  e.out = dir_ / "never.csv";
  EXPECT_THROW(cmd_eval(e), DataError);
  e.checkpoint = dir_ / "missing.ckpt";
  e.data = dir_ / "synth.csv";
  EXPECT_THROW(cmd_eval(e), CheckpointError);
}

TEST_F(CliTest, DiagnoseColumnsAndHeader) {
  DiagnoseOptions d;
  d.data = dir_ / "synth.csv";
  d.lookback = 24;
  d.horizons = {12, 24};
  d.out = dir_ / "diag.csv";
  ASSERT_EQ(cmd_diagnose(d), kExitOk);
  const auto lines = lines_of(d.out);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_NE(lines[0].find("horizons=12,24"), std::string::npos);
  EXPECT_NE(lines[0].find("aggregation="), std::string::npos);
  EXPECT_EQ(lines[1], "dataset,horizon,MS,SS,SM,windows");
  d.horizons.clear();
  EXPECT_THROW(cmd_diagnose(d), ConfigError);
}

TEST_F(CliTest, AblateHasOneRowPerVariant) {
  std::string text = kTinyConfig;
  text.replace(text.find("epochs = 2"), 10, "epochs = 1");
  std::ofstream(dir_ / "one_epoch.ini") << text;
  AblateOptions a{dir_ / "one_epoch.ini", dir_ / "synth.csv", dir_ / "ablate.csv"};
  ASSERT_EQ(cmd_ablate(a), kExitOk);
  const auto lines = lines_of(a.out);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[1], "variant,use_anchor,use_router,use_sam,statistic_aware,best_epoch,val_mse,test_mse,test_mae");
  const char* names[] = {"full", "no_anchor", "no_sam", "no_statistic_aware", "no_router"};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(lines[2 + i].substr(0, lines[2 + i].find(',')), names[i]);
}

TEST_F(CliTest, VerifyExitCodeAndRows) {
  VerifyOptions v;
  v.suite = "beta";
  v.out = dir_ / "verify.csv";
  EXPECT_EQ(cmd_verify(v), kExitOk);
  const auto lines = lines_of(v.out);
  EXPECT_EQ(lines[0], "# verify suite=beta seed=2024");
  EXPECT_EQ(lines[1], "suite,check,value,lower,upper,pass");
  v.suite = "nothing";
  EXPECT_THROW(cmd_verify(v), ConfigError);
}

TEST_F(CliTest, ThirtyTwoBitCheckpointLoads) {
  TrainOptions t{dir_ / "tiny.ini", dir_ / "synth.csv", dir_ / "run32", 32};
  ASSERT_EQ(cmd_train(t), kExitOk);
  const LoadedCheckpoint ck = load_checkpoint(dir_ / "run32" / "model.ckpt");
  EXPECT_EQ(ck.float_width, 32);
  EXPECT_LT(fs::file_size(dir_ / "run32" / "model.ckpt"), fs::file_size(dir_ / "run" / "model.ckpt"));
}

TEST(CliHelpers, SplitNamesAndSeedOverride) {
  EXPECT_EQ(parse_split("train"), Split::Train);
  EXPECT_EQ(parse_split("val"), Split::Val);
  EXPECT_EQ(parse_split("test"), Split::Test);
  EXPECT_THROW(parse_split("Test"), ConfigError);
  ::unsetenv("PULSE_SEED");
  EXPECT_EQ(effective_seed(17), 17u);
  ::setenv("PULSE_SEED", "3", 1);
  EXPECT_EQ(effective_seed(17), 3u);
  ::unsetenv("PULSE_SEED");
}

TEST(CliHelpers, MissingDataFileIsDataError) {
  EXPECT_THROW(prepare(RunConfig{}, "/nonexistent/data.csv"), DataError);
}

}  // namespace
}  // namespace pulse::cli
