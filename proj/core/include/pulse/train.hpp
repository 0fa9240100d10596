// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulse/config.hpp"
#include "pulse/data.hpp"
#include "pulse/model.hpp"
#include "pulse/rng.hpp"
#include "pulse/sam.hpp"
#include "pulse/tensor.hpp"

namespace pulse {

/// Mean over (sample, channel, bin) of the complex modulus of the horizon-axis
/// spectrum of pred - target. The modulus is sqrt(re^2 + im^2 + 1e-12) shifted
/// down by sqrt(1e-12), so it stays smooth at zero and vanishes at equality.
Tensor freq_mae(const Tensor& pred, const Tensor& target);

struct AdamOptions {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

/// One bias-corrected Adam update at step t (t >= 1).
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, const AdamOptions& opt,
               std::size_t t);

/// Adam over a fixed parameter list; moment buffers follow the list order.
class Adam {
 public:
  Adam(ParamList params, AdamOptions opt);
  void step();
  std::size_t steps() const { return t_; }

 private:
  ParamList params_;
  AdamOptions opt_;
  std::vector<AdamMoments> moments_;
  std::size_t t_ = 0;
};

/// Global L2 norm of all gradients; rescales them to max_norm when above it.
double clip_grad_norm(const ParamList& params, double max_norm);

struct StepRecord {
  double loss = 0.0;
  double lambda = 1.0;
  double min_sigma = 0.0;
  ForwardTrace trace;
};

/// Single-threaded trainer. Shuffling, mixup and dropout each draw from their
/// own generator derived from the training seed.
class Trainer {
 public:
  Trainer(PulseModel& model, const TrainConfig& cfg);

  /// Loss of one batch, with gradients accumulated into the parameters (no update).
  StepRecord forward_backward(const WindowBatch& batch, std::size_t batch_index = 0);
  /// forward_backward followed by clipping and one Adam update.
  StepRecord train_step(const WindowBatch& batch, std::size_t batch_index = 0);
  /// Mean batch loss over one shuffled pass.
  double train_epoch(const WindowLoader& loader);

  Rng& shuffle_rng() { return shuffle_rng_; }
  Rng& mix_rng() { return mix_rng_; }
  Rng& dropout_rng() { return dropout_rng_; }
  const Adam& optimizer() const { return adam_; }

 private:
  PulseModel& model_;
  TrainConfig cfg_;
  Adam adam_;
  Rng shuffle_rng_;
  Rng mix_rng_;
  Rng dropout_rng_;
};

struct EvalResult {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t windows = 0;
  std::vector<double> channel_mae;
};

/// Evaluation-mode metrics in the z-scored space over every window of the loader.
/// Per-window sums are reduced in ascending window order for any thread count.
EvalResult evaluate(const PulseModel& model, const WindowLoader& loader, std::size_t threads = 1);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains with early stopping on validation MSE and leaves the best parameters
/// in the model. Training stops once `patience` consecutive epochs fail to improve.
FitResult fit(PulseModel& model, const SeriesDataset& ds, const MarkSpec& marks, const TrainConfig& cfg,
              const EpochCallback& on_epoch = {});

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history, const std::string& header);

/// Checkpoint layout: "PULSE1\n", u64 little-endian header length, JSON header
/// (config, manifest, float width), then the little-endian payload.
void save_checkpoint(const PulseModel& model, const RunConfig& cfg, const std::filesystem::path& path,
                     int float_width = 64);
void write_checkpoint(std::ostream& out, const PulseModel& model, const RunConfig& cfg, int float_width = 64);

struct LoadedCheckpoint {
  RunConfig config;
  PulseModel model;
  int float_width = 64;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
LoadedCheckpoint read_checkpoint(std::istream& in);

}  // namespace pulse
