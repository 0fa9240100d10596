// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "pulse/ops.hpp"
#include "pulse/router.hpp"
#include "pulse/train.hpp"

namespace {

using namespace pulse;

Tensor random_tensor(Shape shape, Rng& rng, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform() * 2.0 - 1.0;
  return Tensor(std::move(shape), std::move(v), grad);
}

// Direct transform, so cost grows with n^2 per row.
void BM_Rdft(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor x = random_tensor({32, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(rdft(x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Rdft)->Arg(96)->Arg(192)->Arg(336)->Arg(720)->Complexity();

void BM_FreqMaeBackward(benchmark::State& state) {
  Rng rng(2);
  const Tensor target = random_tensor({32, 96, 7}, rng);
  Tensor pred = random_tensor({32, 96, 7}, rng, true);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    pred.zero_grad();
    tape.backward(freq_mae(pred, target));
  }
}
BENCHMARK(BM_FreqMaeBackward);

// Router forward over look-back lengths; attention cost should stay flat.
void BM_RouterRoute(benchmark::State& state) {
  const auto lookback = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const PhaseRouter router = PhaseRouter::create(lookback, 96, 24, 16, false, rng);
  const Tensor ax = random_tensor({32, lookback, 7}, rng);
  const Tensor y0 = random_tensor({32, 96, 7}, rng);
  const Tensor enc = random_tensor({32, 96, 7}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(router.route(ax, y0, enc));
}
BENCHMARK(BM_RouterRoute)->Arg(96)->Arg(192)->Arg(336)->Arg(720);

void BM_TrainStep(benchmark::State& state) {
  SynthParams p;
  p.length = 2000;
  p.channels = 3;
  Rng rng(4);
  const SeriesDataset ds = synth_seasonal_hetero(rng, p);
  const MarkSpec marks = parse_mark_spec("HourOfDay");
  TrainConfig cfg;
  cfg.model.channels = 3;
  cfg.model.mark_features = marks.size();
  cfg.model.d_router = 16;
  cfg.model.flags.use_sam = state.range(0) != 0;
  PulseModel model = PulseModel::create(cfg.model, cfg.seed);
  Trainer trainer(model, cfg);
  const WindowLoader loader(ds, Split::Train, 96, 96, marks, 32);
  const WindowBatch batch = loader.make_batch(loader.plan(nullptr).front());
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch));
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
