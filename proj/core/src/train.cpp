// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/train.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "pulse/error.hpp"
#include "pulse/ops.hpp"

namespace pulse {

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kMixStream = 2;
constexpr std::uint64_t kDropoutStream = 3;
constexpr double kModulusEps = 1e-12;
constexpr char kMagic[] = "PULSE1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;

double min_value(const Tensor& t) {
  const auto v = t.values();
  return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

Tensor freq_mae(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.rank() != 3) {
    throw ShapeError(fmt::format("freq_mae: prediction {} vs target {}", shape_str(pred.shape()),
                                 shape_str(target.shape())));
  }
  const Spectrum s = rdft(permute(sub(pred, target), {0, 2, 1}));  // along the horizon
  const Tensor modulus = sqrt(add_scalar(add(square(s.re), square(s.im)), kModulusEps));
  return mean_all(add_scalar(modulus, -std::sqrt(kModulusEps)));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& state, const AdamOptions& opt,
               std::size_t t) {
  if (grads.size() != params.size()) {
    throw ShapeError(fmt::format("adam_step: {} gradients for {} parameters", grads.size(), params.size()));
  }
  if (t == 0) throw NumericError("adam_step: step counter starts at 1");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: moment buffers do not match the parameters");
  }
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= opt.lr * m_hat / (std::sqrt(v_hat) + opt.eps);
  }
}

Adam::Adam(ParamList params, AdamOptions opt) : params_(std::move(params)), opt_(opt), moments_(params_.size()) {}

void Adam::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].tensor;
    if (!p.has_grad()) continue;
    const std::vector<double> grad(p.grad().begin(), p.grad().end());
    adam_step(p.values_mut(), grad, moments_[i], opt_, t_);
  }
}

double clip_grad_norm(const ParamList& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      for (double& g : p.tensor.node()->grad) g *= scale;
    }
  }
  return norm;
}

Trainer::Trainer(PulseModel& model, const TrainConfig& cfg)
    : model_(model),
      cfg_(cfg),
      adam_(model.parameters(), AdamOptions{cfg.lr}),
      shuffle_rng_(Rng::stream(cfg.seed, kShuffleStream)),
      mix_rng_(Rng::stream(cfg.seed, kMixStream)),
      dropout_rng_(Rng::stream(cfg.seed, kDropoutStream)) {
  cfg_.validate();
}

StepRecord Trainer::forward_backward(const WindowBatch& batch, std::size_t batch_index) {
  Tape tape;
  TapeScope scope(tape);
  const bool lookup = model_.future_mode() == FutureAnchorMode::Lookup;

  const Tensor anchor_x = model_.history_anchor(batch);
  const Tensor enc_y = model_.future_encoding(batch);
  const Tensor rows = lookup ? model_.future_rows(batch.t_end) : Tensor();
  const MixPlan plan = make_plan(mix_rng_, batch.size(), cfg_.alpha, model_.config().flags, cfg_.per_sample_lambda,
                                 cfg_.force_lambda);

  Tensor x_in, a_in, e_in, r_in, mu, sigma, y;
  if (!plan.enabled) {
    Normalized n = model_.normalize(batch.x, anchor_x);
    x_in = n.x_tilde;
    a_in = anchor_x;
    e_in = enc_y;
    r_in = rows;
    mu = n.state.mu;
    sigma = n.state.sigma;
    y = batch.y;
  } else if (plan.statistic_aware) {
    Normalized n = model_.normalize(batch.x, anchor_x);
    MixedBatch m = mix_batch(plan, n.x_tilde, anchor_x, enc_y, n.state, batch.y);
    x_in = m.x_tilde;
    a_in = m.anchor_x;
    e_in = m.enc_y;
    r_in = lookup ? mix(plan, rows) : rows;
    mu = m.mu;
    sigma = m.sigma;
    y = m.y;
  } else {
    // Waveform mixup: statistics are re-measured from the mixed residual.
    a_in = mix(plan, anchor_x);
    Normalized n = model_.normalize(mix(plan, batch.x), a_in);
    x_in = n.x_tilde;
    e_in = mix(plan, enc_y);
    r_in = lookup ? mix(plan, rows) : rows;
    mu = n.state.mu;
    sigma = n.state.sigma;
    y = mix(plan, batch.y);
  }

  StepRecord rec;
  rec.lambda = plan.lambda();
  rec.min_sigma = min_value(sigma);
  try {
    const Tensor y0 = model_.latent(x_in, true, dropout_rng_);
    const Tensor anchor_y = model_.future_anchor(a_in, y0, e_in, r_in, &rec.trace);
    const Tensor loss = freq_mae(model_.decode(y0, anchor_y, mu, sigma), y);
    rec.loss = loss.item();
    model_.zero_grad();
    tape.backward(loss);
  } catch (const NumericError& e) {
    throw TrainingError(fmt::format("non-finite value at batch {}: {} (lambda {}, min sigma {})", batch_index,
                                    e.what(), rec.lambda, rec.min_sigma));
  }
  return rec;
}

StepRecord Trainer::train_step(const WindowBatch& batch, std::size_t batch_index) {
  StepRecord rec = forward_backward(batch, batch_index);
  if (cfg_.clip_norm > 0.0) clip_grad_norm(model_.parameters(), cfg_.clip_norm);
  adam_.step();
  return rec;
}

double Trainer::train_epoch(const WindowLoader& loader) {
  const auto batches = loader.plan(&shuffle_rng_);
  if (batches.empty()) throw DataError("train_epoch: no training windows");
  double total = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    total += train_step(loader.make_batch(batches[i]), i).loss;
  }
  return total / static_cast<double>(batches.size());
}

EvalResult evaluate(const PulseModel& model, const WindowLoader& loader, std::size_t threads) {
  const std::size_t n = loader.window_count();
  if (n == 0) throw DataError("evaluate: empty loader");
  const std::size_t horizon = loader.horizon();
  const std::size_t channels = model.config().channels;
  std::vector<double> sq(n, 0.0), ab(n * channels, 0.0);
  const auto batches = loader.plan(nullptr);

  auto run_batch = [&](std::size_t b) {
    const WindowBatch batch = loader.make_batch(batches[b]);
    const Forecast f = model.predict(batch);
    const auto pred = f.y_hat.values();
    const auto truth = batch.y.values();
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const std::size_t w = batch.window_ids[s];
      double sq_sum = 0.0;
      for (std::size_t h = 0; h < horizon; ++h) {
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t i = (s * horizon + h) * channels + c;
          const double e = pred[i] - truth[i];
          sq_sum += e * e;
          ab[w * channels + c] += std::abs(e);
        }
      }
      sq[w] = sq_sum;
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), batches.size());
  if (workers <= 1) {
    for (std::size_t b = 0; b < batches.size(); ++b) run_batch(b);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t b = next++; b < batches.size(); b = next++) {
          try {
            run_batch(b);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  EvalResult r;
  r.windows = n;
  r.channel_mae.assign(channels, 0.0);
  double sq_total = 0.0, ab_total = 0.0;
  for (std::size_t w = 0; w < n; ++w) {
    sq_total += sq[w];
    for (std::size_t c = 0; c < channels; ++c) {
      ab_total += ab[w * channels + c];
      r.channel_mae[c] += ab[w * channels + c];
    }
  }
  const double count = static_cast<double>(n * horizon * channels);
  r.mse = sq_total / count;
  r.mae = ab_total / count;
  for (double& v : r.channel_mae) v /= static_cast<double>(n * horizon);
  return r;
}

FitResult fit(PulseModel& model, const SeriesDataset& ds, const MarkSpec& marks, const TrainConfig& cfg,
              const EpochCallback& on_epoch) {
  cfg.validate();
  const auto& mc = model.config();
  if (mc.channels != ds.values.cols || mc.mark_features != marks.size()) {
    throw ConfigError(fmt::format("model expects {} channels and {} mark features; data has {} and {}", mc.channels,
                                  mc.mark_features, ds.values.cols, marks.size()));
  }
  const WindowLoader train_loader(ds, Split::Train, mc.lookback, mc.horizon, marks, cfg.batch_size);
  const WindowLoader val_loader(ds, Split::Val, mc.lookback, mc.horizon, marks, cfg.batch_size);

  Trainer trainer(model, cfg);
  FitResult result;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  auto best = model.snapshot();
  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = trainer.train_epoch(train_loader);
    const EvalResult val = evaluate(model, val_loader, cfg.eval_threads);
    rec.val_mse = val.mse;
    rec.val_mae = val.mae;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (val.mse < result.best_val_mse) {
      result.best_val_mse = val.mse;
      result.best_epoch = epoch;
      best = model.snapshot();
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  model.restore(best);
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history, const std::string& header) {
  out << header << "\n" << "epoch,train_loss,val_mse,val_mae\n";
  for (const auto& r : history) out << fmt::format("{},{},{},{}\n", r.epoch, r.train_loss, r.val_mse, r.val_mae);
}

void write_checkpoint(std::ostream& out, const PulseModel& model, const RunConfig& cfg, int float_width) {
  if (float_width != 64 && float_width != 32) throw CheckpointError(fmt::format("unsupported float width {}", float_width));
  RunConfig stored = cfg;
  stored.train.model = model.config();
  const std::size_t bytes_per = static_cast<std::size_t>(float_width) / 8;

  nlohmann::json manifest = nlohmann::json::array();
  std::string payload;
  for (const auto& p : model.parameters()) {
    manifest.push_back({{"name", p.name}, {"shape", p.tensor.shape()}, {"offset", payload.size()},
                        {"count", p.tensor.numel()}});
    for (double v : p.tensor.values()) {
      std::uint64_t bits = 0;
      if (float_width == 64) {
        bits = std::bit_cast<std::uint64_t>(v);
      } else {
        bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      }
      for (std::size_t i = 0; i < bytes_per; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
    }
  }
  nlohmann::json header;
  header["format"] = "PULSE1";
  header["float_width"] = float_width;
  header["config"] = nlohmann::json::parse(to_json(stored));
  header["params"] = std::move(manifest);
  header["payload_bytes"] = payload.size();
  const std::string header_text = header.dump();

  std::string prefix(kMagic, kMagicLen);
  put_u64(prefix, header_text.size());
  out.write(prefix.data(), static_cast<std::streamsize>(prefix.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw CheckpointError("checkpoint write failed");
}

void save_checkpoint(const PulseModel& model, const RunConfig& cfg, const std::filesystem::path& path, int float_width) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(fmt::format("cannot open '{}' for writing", path.string()));
  write_checkpoint(out, model, cfg, float_width);
}

LoadedCheckpoint read_checkpoint(std::istream& in) {
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0) {
    throw CheckpointError("not a PULSE1 checkpoint (magic mismatch)");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t header_len = get_u64(raw + kMagicLen);
  const std::size_t header_begin = kMagicLen + 8;
  if (header_len > bytes.size() - header_begin) throw CheckpointError("checkpoint header length exceeds file size");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(header_begin, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(fmt::format("malformed checkpoint header: {}", e.what()));
  }

  try {
    const int width = header.at("float_width").get<int>();
    if (width != 64 && width != 32) throw CheckpointError(fmt::format("unsupported float width {}", width));
    const std::size_t bytes_per = static_cast<std::size_t>(width) / 8;
    RunConfig cfg = run_config_from_json(header.at("config").dump());
    const std::size_t payload_begin = header_begin + header_len;
    const std::size_t payload_len = bytes.size() - payload_begin;
    if (payload_len != header.at("payload_bytes").get<std::size_t>()) {
      throw CheckpointError(fmt::format("payload length mismatch: header declares {} bytes, file holds {}",
                                        header.at("payload_bytes").get<std::size_t>(), payload_len));
    }

    PulseModel model = PulseModel::create(cfg.train.model, cfg.train.seed);
    ParamList params = model.parameters();
    const auto& manifest = header.at("params");
    if (manifest.size() != params.size()) {
      throw CheckpointError(fmt::format("manifest lists {} parameters, model has {}", manifest.size(), params.size()));
    }
    std::size_t expected = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& entry = manifest[i];
      const auto name = entry.at("name").get<std::string>();
      if (name != params[i].name) throw CheckpointError(fmt::format("unknown parameter name '{}'", name));
      const auto shape = entry.at("shape").get<Shape>();
      const auto count = entry.at("count").get<std::size_t>();
      const auto offset = entry.at("offset").get<std::size_t>();
      if (shape != params[i].tensor.shape() || count != params[i].tensor.numel() || offset != expected) {
        throw CheckpointError(fmt::format("manifest entry '{}' does not match the model layout", name));
      }
      expected += count * bytes_per;
    }
    if (expected != payload_len) {
      throw CheckpointError(fmt::format("payload length mismatch: manifest needs {} bytes, file holds {}", expected,
                                        payload_len));
    }
    const unsigned char* p = raw + payload_begin;
    for (auto& param : params) {
      auto dst = param.tensor.values_mut();
      for (double& v : dst) {
        std::uint64_t bits = 0;
        for (std::size_t b = 0; b < bytes_per; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
        p += bytes_per;
        v = width == 64 ? std::bit_cast<double>(bits)
                        : static_cast<double>(std::bit_cast<float>(static_cast<std::uint32_t>(bits)));
      }
      check_finite(dst, "checkpoint payload");
    }
    return {std::move(cfg), std::move(model), width};
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(fmt::format("malformed checkpoint header: {}", e.what()));
  } catch (const ConfigError& e) {
    throw CheckpointError(fmt::format("checkpoint config: {}", e.what()));
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path.string()));
  return read_checkpoint(in);
}

}  // namespace pulse
