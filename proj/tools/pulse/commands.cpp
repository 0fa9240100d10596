// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>

#include "pulse/error.hpp"
#include "pulse/log.hpp"
#include "pulse/metrics.hpp"
#include "pulse/model.hpp"
#include "pulse/train.hpp"
#include "pulse/verify.hpp"

namespace pulse::cli {

namespace {

/// Runs `body` against the file at `path`, or stdout when the path is empty.
void write_output(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.empty()) {
    body(std::cout);
    std::cout.flush();
    return;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot open '{}' for writing", path.string()));
  body(out);
  if (!out) throw DataError(fmt::format("failed writing '{}'", path.string()));
}

SeriesDataset load_dataset(const DataConfig& data, const std::filesystem::path& path) {
  return load_csv(path, data.timestamp_column, data.ratios);
}

struct Evaluated {
  EvalResult val;
  EvalResult test;
};

Evaluated evaluate_splits(const PulseModel& model, const Prepared& p) {
  const auto& m = p.cfg.train.model;
  const WindowLoader val(p.ds, Split::Val, m.lookback, m.horizon, p.marks, p.cfg.train.batch_size);
  const WindowLoader test(p.ds, Split::Test, m.lookback, m.horizon, p.marks, p.cfg.train.batch_size);
  return {evaluate(model, val, p.cfg.train.eval_threads), evaluate(model, test, p.cfg.train.eval_threads)};
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

Prepared prepare(const RunConfig& cfg, const std::filesystem::path& data) {
  Prepared p{cfg, load_dataset(cfg.data, data), parse_mark_spec(cfg.data.marks)};
  auto& m = p.cfg.train.model;
  m.channels = p.ds.channels();
  m.mark_features = p.marks.size();
  if (p.cfg.data.auto_period) {
    const PeriodEstimate est = detect_period_acf(p.ds, p.cfg.data.acf_max_lag);
    m.period = est.period;
    m.codebook_size = est.period;
    p.cfg.data.auto_period = false;
  }
  p.cfg.train.validate();
  return p;
}

Prepared prepare_for_checkpoint(const RunConfig& cfg, const std::filesystem::path& data) {
  Prepared p{cfg, load_dataset(cfg.data, data), parse_mark_spec(cfg.data.marks)};
  const auto& m = p.cfg.train.model;
  if (p.ds.channels() != m.channels) {
    throw DataError(fmt::format("'{}' has {} channels but the checkpoint expects {}", data.string(),
                                p.ds.channels(), m.channels));
  }
  if (p.marks.size() != m.mark_features) {
    throw DataError(fmt::format("mark spec '{}' has {} features but the checkpoint expects {}", cfg.data.marks,
                                p.marks.size(), m.mark_features));
  }
  return p;
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw ConfigError(fmt::format("unknown split '{}' (train, val, test)", name));
}

std::uint64_t effective_seed(std::uint64_t fallback) {
  RunConfig probe;
  probe.train.seed = fallback;
  apply_seed_override(probe);
  return probe.train.seed;
}

int cmd_train(const TrainOptions& opt) {
  RunConfig cfg = load_run_config(opt.config);
  apply_seed_override(cfg);
  const Prepared p = prepare(cfg, opt.data);
  const std::string header = csv_header(p.cfg);

  PulseModel model = PulseModel::create(p.cfg.train.model, p.cfg.train.seed);
  const FitResult fitted = fit(model, p.ds, p.marks, p.cfg.train, [](const EpochRecord& r) {
    std::cerr << fmt::format("epoch {:3d}  train_loss {:.6f}  val_mse {:.6f}  val_mae {:.6f}\n", r.epoch, r.train_loss,
                             r.val_mse, r.val_mae);
  });
  const Evaluated ev = evaluate_splits(model, p);

  std::filesystem::create_directories(opt.out_dir);
  save_checkpoint(model, p.cfg, opt.out_dir / "model.ckpt", opt.float_width);
  write_output(opt.out_dir / "history.csv",
               [&](std::ostream& out) { write_history_csv(out, fitted.history, header); });
  write_output(opt.out_dir / "metrics.csv", [&](std::ostream& out) {
    out << header << "\nsplit,mse,mae,windows,best_epoch\n";
    out << fmt::format("val,{},{},{},{}\n", ev.val.mse, ev.val.mae, ev.val.windows, fitted.best_epoch);
    out << fmt::format("test,{},{},{},{}\n", ev.test.mse, ev.test.mae, ev.test.windows, fitted.best_epoch);
  });
  std::cout << fmt::format("val_mse={:.6f} val_mae={:.6f} test_mse={:.6f} test_mae={:.6f}\n", ev.val.mse,
                           ev.val.mae, ev.test.mse, ev.test.mae);
  return kExitOk;
}

int cmd_eval(const EvalOptions& opt) {
  const Split split = parse_split(opt.split);
  const LoadedCheckpoint ck = load_checkpoint(opt.checkpoint);
  const Prepared p = prepare_for_checkpoint(ck.config, opt.data);
  const auto& m = p.cfg.train.model;
  const WindowLoader loader(p.ds, split, m.lookback, m.horizon, p.marks, p.cfg.train.batch_size);
  const EvalResult res = evaluate(ck.model, loader, p.cfg.train.eval_threads);

  // The error and the in-sample naive scale share each channel's standardization, so the ratio is unit-free.
  const SplitRange train = p.ds.range(Split::Train);
  std::vector<double> insample(train.size());
  double mase_total = 0.0;
  for (std::size_t c = 0; c < p.ds.channels(); ++c) {
    for (std::size_t t = 0; t < train.size(); ++t) insample[t] = p.ds.values(train.begin + t, c);
    mase_total += res.channel_mae[c] / (seasonal_naive_scale(insample, opt.season) + 1e-8);
  }
  const double mase_value = mase_total / static_cast<double>(p.ds.channels());

  write_output(opt.out, [&](std::ostream& out) {
    out << csv_header(p.cfg) << "\nsplit,mse,mae,mase,season,windows\n";
    out << fmt::format("{},{},{},{},{},{}\n", opt.split, res.mse, res.mae, mase_value, opt.season, res.windows);
  });
  return kExitOk;
}

int cmd_forecast(const ForecastOptions& opt) {
  const Split split = parse_split(opt.split);
  const LoadedCheckpoint ck = load_checkpoint(opt.checkpoint);
  const Prepared p = prepare_for_checkpoint(ck.config, opt.data);
  const auto& m = p.cfg.train.model;
  const WindowLoader loader(p.ds, split, m.lookback, m.horizon, p.marks, 1);
  if (opt.window >= loader.window_count()) {
    throw ConfigError(fmt::format("window {} out of range; the {} split has {} windows", opt.window, opt.split,
                                  loader.window_count()));
  }
  const std::vector<std::size_t> ids{opt.window};
  const WindowBatch batch = loader.make_batch(ids);
  const Forecast fc = ck.model.predict(batch);

  write_output(opt.out, [&](std::ostream& out) {
    out << csv_header(p.cfg) << "\nstep,channel,prediction,ground_truth,anchor_y\n";
    for (std::size_t h = 0; h < m.horizon; ++h) {
      for (std::size_t c = 0; c < m.channels; ++c) {
        const std::size_t i = h * m.channels + c;
        out << fmt::format("{},{},{},{},{}\n", h, p.ds.channel_names[c], fc.y_hat[i], batch.y[i], fc.a_y[i]);
      }
    }
  });
  return kExitOk;
}

int cmd_diagnose(const DiagnoseOptions& opt) {
  RunConfig cfg;
  cfg.data.timestamp_column = opt.timestamp_column;
  cfg.data.ratios = opt.ratios;
  cfg.train.model.lookback = opt.lookback;
  if (opt.horizons.empty()) throw ConfigError("diagnose needs at least one horizon");
  const SeriesDataset ds = load_dataset(cfg.data, opt.data);
  const auto rows = mismatch_table(ds, opt.lookback, opt.horizons, opt.threads);
  write_output(opt.out, [&](std::ostream& out) {
    write_mismatch_csv(out, rows, csv_header(cfg) + " horizons=" + join(opt.horizons) +
                                   " aggregation=zscored-stride1-test-windows,channel-mean,window-mean");
  });
  return kExitOk;
}

int cmd_ablate(const AblateOptions& opt) {
  RunConfig cfg = load_run_config(opt.config);
  apply_seed_override(cfg);
  const Prepared base = prepare(cfg, opt.data);

  struct Variant {
    const char* name;
    AblationFlags flags;
  };
  const Variant variants[] = {
      {"full", {true, true, true, true}},
      {"no_anchor", {false, true, true, true}},
      {"no_sam", {true, true, false, true}},
      {"no_statistic_aware", {true, true, true, false}},
      {"no_router", {true, false, true, true}},
  };

  std::vector<std::string> lines;
  for (const auto& v : variants) {
    Prepared p = base;
    p.cfg.train.model.flags = v.flags;
    std::cerr << fmt::format("ablation {}\n", v.name);
    PulseModel model = PulseModel::create(p.cfg.train.model, p.cfg.train.seed);
    const FitResult fitted = fit(model, p.ds, p.marks, p.cfg.train);
    const Evaluated ev = evaluate_splits(model, p);
    lines.push_back(fmt::format("{},{},{},{},{},{},{},{},{}\n", v.name, int(v.flags.use_anchor),
                                int(v.flags.use_router), int(v.flags.use_sam), int(v.flags.statistic_aware),
                                fitted.best_epoch, ev.val.mse, ev.test.mse, ev.test.mae));
  }
  write_output(opt.out, [&](std::ostream& out) {
    out << csv_header(base.cfg)
        << "\nvariant,use_anchor,use_router,use_sam,statistic_aware,best_epoch,val_mse,test_mse,test_mae\n";
    for (const auto& line : lines) out << line;
  });
  return kExitOk;
}

int cmd_synth(const SynthOptions& opt) {
  const std::uint64_t seed = effective_seed(opt.seed);
  Rng rng(seed);
  const SeriesDataset ds = synth_seasonal_hetero(rng, opt.params);
  const auto& sp = opt.params;
  write_output(opt.out, [&](std::ostream& out) {
    out << fmt::format(
        "# synth seed={} length={} channels={} period={} volatility_period={} trend_slope={} noise_base={}\n", seed,
        sp.length, sp.channels, sp.period, sp.volatility_period, sp.trend_slope, sp.noise_base);
    write_csv(out, ds);
  });
  return kExitOk;
}

int cmd_verify(const VerifyOptions& opt) {
  const std::uint64_t seed = effective_seed(opt.seed);
  const auto rows = run_verify(opt.suite, seed);
  write_output(opt.out, [&](std::ostream& out) {
    write_check_csv(out, rows, fmt::format("# verify suite={} seed={}", opt.suite, seed));
  });
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.pass ? 0 : 1;
  std::cerr << fmt::format("verify {}: {} checks, {} failed\n", opt.suite, rows.size(), failed);
  return failed == 0 ? kExitOk : kExitFailed;
}

int cmd_export_anchors(const ExportOptions& opt) {
  const Split split = parse_split(opt.split);
  const LoadedCheckpoint ck = load_checkpoint(opt.checkpoint);
  const Prepared p = prepare_for_checkpoint(ck.config, opt.data);
  const auto& m = p.cfg.train.model;
  const WindowLoader loader(p.ds, split, m.lookback, m.horizon, p.marks, p.cfg.train.batch_size);

  std::vector<std::size_t> windows = opt.windows;
  if (windows.empty()) {
    windows.resize(loader.window_count());
    for (std::size_t i = 0; i < windows.size(); ++i) windows[i] = i;
  }
  for (std::size_t w : windows) {
    if (w >= loader.window_count()) {
      throw ConfigError(fmt::format("window {} out of range; the {} split has {} windows", w, opt.split,
                                    loader.window_count()));
    }
  }

  write_output(opt.out, [&](std::ostream& out) {
    out << csv_header(p.cfg) << "\nwindow,segment,step,channel,anchor\n";
    const std::size_t chunk = std::max<std::size_t>(p.cfg.train.batch_size, 1);
    for (std::size_t begin = 0; begin < windows.size(); begin += chunk) {
      const std::size_t end = std::min(windows.size(), begin + chunk);
      const std::vector<std::size_t> ids(windows.begin() + begin, windows.begin() + end);
      const Forecast fc = ck.model.predict(loader.make_batch(ids));
      for (std::size_t b = 0; b < ids.size(); ++b) {
        for (std::size_t t = 0; t < m.lookback; ++t) {
          for (std::size_t c = 0; c < m.channels; ++c) {
            out << fmt::format("{},history,{},{},{}\n", ids[b], t, p.ds.channel_names[c],
                               fc.a_x[(b * m.lookback + t) * m.channels + c]);
          }
        }
        for (std::size_t h = 0; h < m.horizon; ++h) {
          for (std::size_t c = 0; c < m.channels; ++c) {
            out << fmt::format("{},future,{},{},{}\n", ids[b], h, p.ds.channel_names[c],
                               fc.a_y[(b * m.horizon + h) * m.channels + c]);
          }
        }
      }
    }
  });
  return kExitOk;
}

}  // namespace pulse::cli
