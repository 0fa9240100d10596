// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <sstream>

#include "pulse/commands.hpp"
#include "pulse/error.hpp"

namespace {

using namespace pulse::cli;

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw pulse::ConfigError(fmt::format("'{}' is not a comma-separated list of non-negative integers", text));
    }
  }
  return out;
}

pulse::SplitRatios parse_ratios(const std::string& text) {
  std::stringstream ss(text);
  std::string item;
  std::vector<double> v;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw pulse::ConfigError(fmt::format("bad split ratio '{}'", item));
    }
  }
  if (v.size() != 3) throw pulse::ConfigError(fmt::format("expected three split ratios, got '{}'", text));
  return {v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulse: phase-anchored forecasting toolkit"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "Fit a model with early stopping; writes checkpoint and CSVs");
  c_train->add_option("--config", train.config, "INI configuration")->required();
  c_train->add_option("--data", train.data, "Dataset CSV")->required();
  c_train->add_option("--out", train.out_dir, "Output directory")->required();
  c_train->add_option("--float-width", train.float_width, "Checkpoint float width (64 or 32)")
      ->check(CLI::IsMember({32, 64}));

  EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "MSE, MAE and MASE of a checkpoint on one split");
  c_eval->add_option("--ckpt", eval.checkpoint, "Checkpoint file")->required();
  c_eval->add_option("--data", eval.data, "Dataset CSV")->required();
  c_eval->add_option("--split", eval.split, "train, val or test");
  c_eval->add_option("--season", eval.season, "MASE seasonal period m")->check(CLI::PositiveNumber);
  c_eval->add_option("--out", eval.out, "Output CSV (default stdout)");

  ForecastOptions forecast;
  auto* c_fc = app.add_subcommand("forecast", "Prediction, target and future anchor for one window");
  c_fc->add_option("--ckpt", forecast.checkpoint, "Checkpoint file")->required();
  c_fc->add_option("--data", forecast.data, "Dataset CSV")->required();
  c_fc->add_option("--split", forecast.split, "train, val or test");
  c_fc->add_option("--window", forecast.window, "Window index within the split");
  c_fc->add_option("--out", forecast.out, "Output CSV (default stdout)");

  DiagnoseOptions diag;
  std::string diag_horizons = "96,192,336,720";
  std::string diag_ratios = "0.7,0.1,0.2";
  auto* c_diag = app.add_subcommand("diagnose", "History-future mismatch (MS, SS, SM) over test windows");
  c_diag->add_option("--data", diag.data, "Dataset CSV")->required();
  c_diag->add_option("--lookback", diag.lookback, "Look-back length T");
  c_diag->add_option("--horizons", diag_horizons, "Comma-separated horizons");
  c_diag->add_option("--ratios", diag_ratios, "train,val,test split ratios");
  c_diag->add_option("--timestamp-column", diag.timestamp_column, "Timestamp column name");
  c_diag->add_option("--threads", diag.threads, "Worker threads");
  c_diag->add_option("--out", diag.out, "Output CSV (default stdout)");

  AblateOptions ablate;
  auto* c_ablate = app.add_subcommand("ablate", "Full model plus one row per removed component");
  c_ablate->add_option("--config", ablate.config, "INI configuration")->required();
  c_ablate->add_option("--data", ablate.data, "Dataset CSV")->required();
  c_ablate->add_option("--out", ablate.out, "Output CSV (default stdout)");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Seasonal series with heteroscedastic noise");
  c_synth->add_option("--length", synth.params.length, "Number of time steps");
  c_synth->add_option("--channels", synth.params.channels, "Number of channels");
  c_synth->add_option("--period", synth.params.period, "Seasonal period");
  c_synth->add_option("--volatility-period", synth.params.volatility_period, "Noise-envelope period");
  c_synth->add_option("--trend", synth.params.trend_slope, "Linear trend slope");
  c_synth->add_option("--noise", synth.params.noise_base, "Base noise level");
  c_synth->add_option("--seed", synth.seed, "Random seed (PULSE_SEED overrides)");
  c_synth->add_option("--out", synth.out, "Output CSV (default stdout)");

  VerifyOptions verify;
  auto* c_verify = app.add_subcommand("verify", "Run a verification suite; exit 1 if any check fails");
  c_verify->add_option("suite", verify.suite, "prop31, thm32, gradcheck, beta, complexity or all")
      ->check(CLI::IsMember({"prop31", "thm32", "gradcheck", "beta", "complexity", "all"}));
  c_verify->add_option("--seed", verify.seed, "Random seed (PULSE_SEED overrides)");
  c_verify->add_option("--out", verify.out, "Output CSV (default stdout)");

  ExportOptions exp;
  std::string exp_windows;
  auto* c_exp = app.add_subcommand("export-anchors", "History and future anchors per window");
  c_exp->add_option("--ckpt", exp.checkpoint, "Checkpoint file")->required();
  c_exp->add_option("--data", exp.data, "Dataset CSV")->required();
  c_exp->add_option("--split", exp.split, "train, val or test");
  c_exp->add_option("--windows", exp_windows, "Comma-separated window indices (default all)");
  c_exp->add_option("--out", exp.out, "Output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_train->parsed()) return cmd_train(train);
    if (c_eval->parsed()) return cmd_eval(eval);
    if (c_fc->parsed()) return cmd_forecast(forecast);
    if (c_diag->parsed()) {
      diag.horizons = parse_list(diag_horizons);
      diag.ratios = parse_ratios(diag_ratios);
      return cmd_diagnose(diag);
    }
    if (c_ablate->parsed()) return cmd_ablate(ablate);
    if (c_synth->parsed()) return cmd_synth(synth);
    if (c_verify->parsed()) return cmd_verify(verify);
    if (c_exp->parsed()) {
      if (!exp_windows.empty()) exp.windows = parse_list(exp_windows);
      return cmd_export_anchors(exp);
    }
  } catch (const pulse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pulse::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const pulse::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}
