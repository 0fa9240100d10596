// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pulse/error.hpp"
#include "pulse/train.hpp"
#include "pulse/verify.hpp"
#include "test_util.hpp"

namespace pulse {
namespace {

using test::random_tensor;
using test::to_vector;

struct Fixture {
  SeriesDataset ds;
  MarkSpec marks;
  TrainConfig cfg;
};

Fixture tiny(AblationFlags flags = {}) {
  SynthParams p;
  p.length = 600;
  p.channels = 2;
  p.volatility_period = 48;
  Rng rng(7);
  Fixture f{synth_seasonal_hetero(rng, p), parse_mark_spec("HourOfDay,DayOfWeek"), {}};
  auto& m = f.cfg.model;
  m.lookback = 24;
  m.horizon = 12;
  m.channels = 2;
  m.mark_features = 2;
  m.period = 24;
  m.codebook_size = 24;
  m.patch = 6;
  m.d_router = 4;
  m.d_backbone = 16;
  m.d_time = 4;
  m.flags = flags;
  f.cfg.batch_size = 16;
  f.cfg.epochs = 3;
  return f;
}

std::filesystem::path temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pulse_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(FreqMae, ZeroAtEqualityAndDcCase) {
  Rng rng(1);
  const Tensor y = random_tensor({2, 8, 3}, rng, -1, 1, false);
  EXPECT_EQ(freq_mae(y, y).item(), 0.0);
  const Tensor pred = Tensor::zeros({1, 4, 1});
  const Tensor target = Tensor::full({1, 4, 1}, 1.0);
  // Bin moduli (4, 0, 0), each shifted down by the 1e-6 guard.
  EXPECT_NEAR(freq_mae(pred, target).item(), (4.0 - 1e-6) / 3.0, 1e-12);
  EXPECT_GE(freq_mae(random_tensor({2, 8, 3}, rng, -1, 1, false), y).item(), 0.0);
  EXPECT_THROW(freq_mae(pred, Tensor::zeros({1, 5, 1})), ShapeError);
}

TEST(FreqMae, MatchesBruteForceSpectrum) {
  Rng rng(2);
  const Tensor p = random_tensor({2, 7, 2}, rng, -1, 1, false), t = random_tensor({2, 7, 2}, rng, -1, 1, false);
  double total = 0.0;
  const std::size_t bins = 4;
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < bins; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t h = 0; h < 7; ++h) {
          const double d = p[(b * 7 + h) * 2 + c] - t[(b * 7 + h) * 2 + c];
          re += d * std::cos(2 * M_PI * k * h / 7.0);
          im -= d * std::sin(2 * M_PI * k * h / 7.0);
        }
        total += std::sqrt(re * re + im * im + 1e-12) - std::sqrt(1e-12);
      }
  EXPECT_NEAR(freq_mae(p, t).item(), total / (2 * 2 * bins), 1e-12);
}

TEST(FreqMae, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  Tensor p = random_tensor({1, 6, 1}, rng);
  const Tensor t = random_tensor({1, 6, 1}, rng, -1, 1, false);
  std::vector<Tensor> leaves{p};
  EXPECT_LT(gradcheck(leaves, [&] { return freq_mae(p, t); }, 1, 1e-6), 1e-5);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<double> x{1.0, -2.0};
  const std::vector<double> g{0.0, 0.0};
  AdamMoments st;
  adam_step(x, g, st, {}, 1);
  EXPECT_EQ(x, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> x{0.0};
  const std::vector<double> g{1.0};
  AdamMoments st;
  AdamOptions opt;
  opt.lr = 0.01;
  adam_step(x, g, st, opt, 1);
  EXPECT_NEAR(x[0], -0.01 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, MatchesScalarRecurrenceOnQuadratic) {
  // Independent recurrence for f(x) = x^2 from x = 5.
  double ref = 5.0, m = 0.0, v = 0.0;
  std::vector<double> x{5.0};
  AdamMoments st;
  AdamOptions opt;
  opt.lr = 0.1;
  for (std::size_t t = 1; t <= 100; ++t) {
    const double g = 2.0 * ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ref -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    const std::vector<double> grad{2.0 * x[0]};
    adam_step(x, grad, st, opt, t);
    ASSERT_NEAR(x[0], ref, 1e-12) << t;
  }
  EXPECT_LT(std::abs(x[0]), 1.0);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<double> x{1.0, 2.0};
  const std::vector<double> g{1.0};
  AdamMoments st;
  EXPECT_THROW(adam_step(x, g, st, {}, 1), ShapeError);
}

TEST(Clip, RescalesToMaxNorm) {
  Tensor a({2}, {0.0, 0.0}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum_all(mul(a, Tensor({2}, {3.0, 4.0}))));
  }
  ParamList params{{"a", a}};
  EXPECT_NEAR(clip_grad_norm(params, 1.0), 5.0, 1e-15);
  EXPECT_NEAR(a.grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(a.grad()[1], 0.8, 1e-15);
}

double group_grad_norm(const PulseModel& m, const std::string& group) {
  double s = 0.0;
  for (const auto& p : m.parameters())
    if (parameter_group(p.name) == group)
      for (double g : p.tensor.grad()) s += g * g;
  return std::sqrt(s);
}

TEST(Trainer, GradientFlowFollowsFlags) {
  struct Case {
    AblationFlags flags;
    bool codebook, encoder, router;
  };
  const std::vector<Case> cases{
      {{true, true, true, true}, true, true, true},
      {{true, false, true, true}, true, true, false},
      {{false, true, true, true}, false, false, false},
      {{true, true, false, true}, true, true, true},
  };
  for (const auto& c : cases) {
    Fixture f = tiny(c.flags);
    PulseModel model = PulseModel::create(f.cfg.model, f.cfg.seed);
    // A nonzero codebook keeps the anchor path away from its zero start.
    Rng perturb(42);
    for (auto& v : const_cast<Tensor&>(model.codebook().table).values_mut()) v = perturb.uniform() - 0.5;
    Trainer trainer(model, f.cfg);
    WindowLoader loader(f.ds, Split::Train, 24, 12, f.marks, 8);
    trainer.forward_backward(loader.make_batch(loader.plan(nullptr).front()));
    EXPECT_GT(group_grad_norm(model, "backbone"), 0.0);
    EXPECT_EQ(group_grad_norm(model, "codebook") > 0.0, c.codebook);
    EXPECT_EQ(group_grad_norm(model, "time_encoder") > 0.0, c.encoder);
    EXPECT_EQ(group_grad_norm(model, "router") > 0.0, c.router);
  }
}

TEST(Trainer, SamOffMeansLambdaOne) {
  Fixture f = tiny({true, true, false, true});
  PulseModel model = PulseModel::create(f.cfg.model, f.cfg.seed);
  Trainer trainer(model, f.cfg);
  WindowLoader loader(f.ds, Split::Train, 24, 12, f.marks, 8);
  for (const auto& ids : loader.plan(nullptr)) EXPECT_EQ(trainer.train_step(loader.make_batch(ids)).lambda, 1.0);
}

TEST(Trainer, ForcedLambdaOneEqualsNoMixup) {
  Fixture with = tiny();
  with.cfg.force_lambda = 1.0;
  Fixture without = tiny({true, true, false, true});
  PulseModel a = PulseModel::create(with.cfg.model, with.cfg.seed);
  PulseModel b = PulseModel::create(without.cfg.model, without.cfg.seed);
  Trainer ta(a, with.cfg), tb(b, without.cfg);
  WindowLoader loader(with.ds, Split::Train, 24, 12, with.marks, 8);
  const auto ids = loader.plan(nullptr).front();
  const WindowBatch batch = loader.make_batch(ids);
  EXPECT_EQ(ta.forward_backward(batch).loss, tb.forward_backward(batch).loss);
}

TEST(Trainer, AnchorOffMatchesRevinMlpReference) {
  Fixture f = tiny({false, false, false, false});
  PulseModel model = PulseModel::create(f.cfg.model, f.cfg.seed);
  PulseModel shadow = PulseModel::create(f.cfg.model, f.cfg.seed);
  Trainer trainer(model, f.cfg);
  WindowLoader loader(f.ds, Split::Train, 24, 12, f.marks, f.cfg.batch_size);

  // Reference: instance normalization, shared MLP, affine decode, Adam on the MLP.
  const auto& mlp = dynamic_cast<const MlpBackbone&>(shadow.backbone());
  ParamList mlp_params;
  mlp.collect("mlp", mlp_params);
  AdamOptions opt;
  opt.lr = f.cfg.lr;
  Adam adam(mlp_params, opt);
  Rng shuffle = Rng::stream(f.cfg.seed, 1);
  Rng dropout = Rng::stream(f.cfg.seed, 3);
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    double ref_total = 0.0;
    const auto batches = loader.plan(&shuffle);
    for (const auto& ids : batches) {
      const WindowBatch b = loader.make_batch(ids);
      Tape tape;
      TapeScope scope(tape);
      const auto st = mean_std(b.x, 1);
      const Tensor z = div(sub(b.x, st.mean), st.std);
      const Tensor y0 = mlp.forward(z, true, dropout);
      const Tensor loss = freq_mae(add(mul(y0, st.std), st.mean), b.y);
      ref_total += loss.item();
      for (auto& p : mlp_params) p.tensor.zero_grad();
      tape.backward(loss);
      adam.step();
    }
    const double ref = ref_total / batches.size();
    const double got = trainer.train_epoch(loader);
    EXPECT_NEAR(got, ref, 1e-10 * std::abs(ref)) << "epoch " << epoch;
  }
}

TEST(Trainer, TrainingIsBitwiseRepeatable) {
  auto run = [] {
    Fixture f = tiny();
    PulseModel model = PulseModel::create(f.cfg.model, f.cfg.seed);
    Trainer trainer(model, f.cfg);
    WindowLoader loader(f.ds, Split::Train, 24, 12, f.marks, f.cfg.batch_size);
    std::vector<double> losses;
    for (int e = 0; e < 2; ++e) losses.push_back(trainer.train_epoch(loader));
    return losses;
  };
  EXPECT_EQ(run(), run());
}

TEST(Evaluate, MatchesManualReductionAndIsThreadInvariant) {
  Fixture f = tiny();
  const PulseModel model = PulseModel::create(f.cfg.model, f.cfg.seed);
  WindowLoader loader(f.ds, Split::Test, 24, 12, f.marks, 7);
  const EvalResult serial = evaluate(model, loader, 1);
  const EvalResult parallel = evaluate(model, loader, 4);
  EXPECT_EQ(serial.mse, parallel.mse);
  EXPECT_EQ(serial.mae, parallel.mae);
  EXPECT_EQ(serial.windows, loader.window_count());
  double se = 0.0, ae = 0.0;
  std::size_t n = 0;
  for (const auto& ids : loader.plan(nullptr)) {
    const WindowBatch b = loader.make_batch(ids);
    const Tensor pred = model.predict(b).y_hat;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
      se += (pred[i] - b.y[i]) * (pred[i] - b.y[i]);
      ae += std::abs(pred[i] - b.y[i]);
      ++n;
    }
  }
  EXPECT_NEAR(serial.mse, se / n, 1e-12);
  EXPECT_NEAR(serial.mae, ae / n, 1e-12);
}

TEST(Evaluate, ZeroForecastOnStandardizedTargets) {
  // With every weight zero and no anchor, the forecast is the window mean;
  // on a zero-mean alternating series that mean is exactly 0.
  auto ds = test::function_dataset(400, 1, [](std::size_t t, std::size_t) { return t % 2 ? 1.0 : -1.0; });
  TrainConfig cfg;
  cfg.model.lookback = 24;
  cfg.model.horizon = 12;
  cfg.model.d_backbone = 8;
  cfg.model.flags.use_anchor = false;
  PulseModel model = PulseModel::create(cfg.model, 1);
  for (auto& p : model.parameters()) for (auto& v : const_cast<Tensor&>(p.tensor).values_mut()) v = 0.0;
  WindowLoader loader(ds, Split::Test, 24, 12, {}, 8);
  const EvalResult r = evaluate(model, loader);
  EXPECT_NEAR(r.mse, 1.0, 1e-12);
  EXPECT_NEAR(r.mae, 1.0, 1e-12);
}

TEST(Fit, KeepsBestEpochAndStopsOnPatience) {
  Fixture f = tiny();
  f.cfg.epochs = 6;
  f.cfg.patience = 0;
  PulseModel model = PulseModel::create(f.cfg.model, f.cfg.seed);
  std::size_t callbacks = 0;
  const FitResult r = fit(model, f.ds, f.marks, f.cfg, [&](const EpochRecord&) { ++callbacks; });
  EXPECT_EQ(callbacks, r.history.size());
  // patience 0: training ends at the first epoch that fails to improve.
  double best = r.history.front().val_mse;
  std::size_t first_miss = r.history.size();
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    if (r.history[i].val_mse >= best) {
      first_miss = i + 1;
      break;
    }
    best = r.history[i].val_mse;
  }
  EXPECT_EQ(r.history.size(), std::min<std::size_t>(first_miss, 6));
  for (const auto& e : r.history) EXPECT_LE(r.best_val_mse, e.val_mse);
  WindowLoader val(f.ds, Split::Val, 24, 12, f.marks, f.cfg.batch_size);
  EXPECT_EQ(evaluate(model, val).mse, r.best_val_mse);
}

TEST(Fit, HistoryCsvLayout) {
  std::vector<EpochRecord> h{{1, 0.5, 0.25, 0.125}, {2, 0.4, 0.2, 0.1}};
  std::ostringstream out;
  write_history_csv(out, h, "# run");
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "# run");
  EXPECT_NE(s.find("epoch,train_loss,val_mse,val_mae"), std::string::npos);
}

TEST(Checkpoint, RoundTripIsBitExactAndReproducesValidation) {
  Fixture f = tiny();
  f.cfg.epochs = 1;
  RunConfig run;
  run.train = f.cfg;
  PulseModel model = PulseModel::create(f.cfg.model, f.cfg.seed);
  fit(model, f.ds, f.marks, f.cfg);
  const auto path = temp_path("model.ckpt"), again = temp_path("model2.ckpt");
  save_checkpoint(model, run, path);
  const LoadedCheckpoint loaded = load_checkpoint(path);
  EXPECT_EQ(loaded.config, run);
  EXPECT_EQ(loaded.model.snapshot(), model.snapshot());
  save_checkpoint(loaded.model, loaded.config, again);
  EXPECT_EQ(slurp(path), slurp(again));
  WindowLoader val(f.ds, Split::Val, 24, 12, f.marks, f.cfg.batch_size);
  EXPECT_NEAR(evaluate(loaded.model, val).mse, evaluate(model, val).mse, 1e-12);
}

TEST(Checkpoint, SinglePrecisionStoresRoundedValues) {
  Fixture f = tiny();
  RunConfig run;
  run.train = f.cfg;
  const PulseModel model = PulseModel::create(f.cfg.model, 5);
  std::stringstream buf;
  write_checkpoint(buf, model, run, 32);
  const LoadedCheckpoint loaded = read_checkpoint(buf);
  EXPECT_EQ(loaded.float_width, 32);
  const auto a = model.snapshot(), b = loaded.model.snapshot();
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) EXPECT_EQ(b[i][j], static_cast<double>(static_cast<float>(a[i][j])));
}

TEST(Checkpoint, CorruptionIsRejected) {
  Fixture f = tiny();
  RunConfig run;
  run.train = f.cfg;
  const PulseModel model = PulseModel::create(f.cfg.model, 5);
  std::stringstream buf;
  write_checkpoint(buf, model, run);
  const std::string bytes = buf.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() - 8));
  EXPECT_THROW(read_checkpoint(truncated), CheckpointError);
  std::istringstream extra(bytes + "x");
  EXPECT_THROW(read_checkpoint(extra), CheckpointError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'Q';
  std::istringstream magic(bad_magic);
  EXPECT_THROW(read_checkpoint(magic), CheckpointError);
  std::string renamed = bytes;
  const auto at = renamed.find("\"codebook\"");
  ASSERT_NE(at, std::string::npos);
  renamed.replace(at, 10, "\"codebooq\"");
  std::istringstream unknown(renamed);
  EXPECT_THROW(read_checkpoint(unknown), CheckpointError);
  std::istringstream header_cut(bytes.substr(0, 20));
  EXPECT_THROW(read_checkpoint(header_cut), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
}

}  // namespace
}  // namespace pulse
