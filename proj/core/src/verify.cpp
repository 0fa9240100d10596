// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/verify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <ostream>

#include "pulse/anchor.hpp"
#include "pulse/backbone.hpp"
#include "pulse/data.hpp"
#include "pulse/error.hpp"
#include "pulse/model.hpp"
#include "pulse/norm.hpp"
#include "pulse/ops.hpp"
#include "pulse/router.hpp"
#include "pulse/sam.hpp"
#include "pulse/train.hpp"

namespace pulse {

namespace {

Tensor random_leaf(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor(std::move(shape), std::move(v), true);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double population_std(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(x.size()));
}

/// Demeans and rescales x in place to population std `target`.
void rescale(std::vector<double>& x, double target) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  for (double& v : x) v -= mean;
  const double s = population_std(x);
  if (!(s > 0.0)) throw NumericError("degenerate draw: zero standard deviation");
  for (double& v : x) v *= target / s;
}

/// Parameter-free instance normalization of one series.
std::vector<double> revin(std::span<const double> x) {
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sigma = std::sqrt(var / static_cast<double>(x.size()) + kVarianceEps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sigma;
  return out;
}

using SeriesMap = std::function<std::vector<double>(const std::vector<double>&)>;

/// Dense Jacobian by central differences, row-major [out][in].
std::vector<double> numeric_jacobian(const SeriesMap& f, const std::vector<double>& at, double h) {
  const std::size_t n = at.size();
  std::vector<double> jac;
  std::vector<double> x = at;
  for (std::size_t j = 0; j < n; ++j) {
    x[j] = at[j] + h;
    const auto fp = f(x);
    x[j] = at[j] - h;
    const auto fm = f(x);
    x[j] = at[j];
    if (jac.empty()) jac.assign(fp.size() * n, 0.0);
    for (std::size_t i = 0; i < fp.size(); ++i) jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
  }
  return jac;
}

/// Largest singular value of a rows x cols matrix via power iteration on J^T J.
double spectral_norm(const std::vector<double>& jac, std::size_t rows, std::size_t cols, Rng& rng,
                     std::size_t iterations = 20) {
  std::vector<double> v(cols), u(rows);
  for (auto& x : v) x = rng.normal();
  double sigma = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    double nv = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x /= nv;
    for (std::size_t i = 0; i < rows; ++i) {
      u[i] = 0.0;
      for (std::size_t j = 0; j < cols; ++j) u[i] += jac[i * cols + j] * v[j];
    }
    sigma = std::sqrt(std::inner_product(u.begin(), u.end(), u.begin(), 0.0));
    for (std::size_t j = 0; j < cols; ++j) {
      v[j] = 0.0;
      for (std::size_t i = 0; i < rows; ++i) v[j] += jac[i * cols + j] * u[i];
    }
  }
  return sigma;
}

/// Fourth-order central difference of a scalar function at x.
double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h);
}

Tensor project(const Tensor& out, const Tensor& weights) { return sum_all(mul(out, weights)); }

struct TinySetup {
  SeriesDataset ds;
  MarkSpec marks;
  TrainConfig cfg;
};

TinySetup tiny_setup(std::uint64_t seed) {
  SynthParams sp;
  sp.length = 400;
  sp.channels = 2;
  sp.volatility_period = 48.0;
  Rng data_rng = Rng::stream(seed, 41);
  TinySetup s{synth_seasonal_hetero(data_rng, sp), parse_mark_spec("HourOfDay,DayOfWeek"), {}};
  auto& m = s.cfg.model;
  m.lookback = 24;
  m.horizon = 12;
  m.channels = 2;
  m.mark_features = 2;
  m.period = 24;
  m.codebook_size = 12;
  m.patch = 6;
  m.d_router = 4;
  m.d_backbone = 16;
  m.d_time = 4;
  m.dropout = 0.1;
  s.cfg.seed = seed;
  s.cfg.batch_size = 2;
  return s;
}

/// End-to-end training loss of one batch against central differences over every parameter.
double gradcheck_training_graph(const TinySetup& setup, const AblationFlags& flags, std::uint64_t seed, double h) {
  TrainConfig cfg = setup.cfg;
  cfg.model.flags = flags;
  PulseModel model = PulseModel::create(cfg.model, seed);
  // Move the codebook off its zero initialization so the anchor path is generic.
  Rng cb_rng = Rng::stream(seed, 42);
  for (double& v : model.codebook().table.node()->values) v = 0.5 * (2.0 * cb_rng.uniform() - 1.0);

  const WindowLoader loader(setup.ds, Split::Train, cfg.model.lookback, cfg.model.horizon, setup.marks, 2);
  const std::vector<std::size_t> ids{3, 57};
  const WindowBatch batch = loader.make_batch(ids);

  ParamList params = model.parameters();
  {
    Trainer trainer(model, cfg);
    trainer.forward_backward(batch);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].tensor.values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      const double numeric = central_difference(
          [&](double v) {
            values[i] = v;
            return Trainer(model, cfg).forward_backward(batch).loss;
          },
          orig, h);
      values[i] = orig;
      worst = std::max(worst, relative_error(analytic[k][i], numeric));
    }
  }
  return worst;
}

}  // namespace

CheckRow make_check(std::string suite, std::string check, double value, double lower, double upper) {
  const bool pass = std::isfinite(value) && value >= lower && value <= upper;
  return {std::move(suite), std::move(check), value, lower, upper, pass};
}

bool all_pass(std::span<const CheckRow> rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

void write_check_csv(std::ostream& out, std::span<const CheckRow> rows, const std::string& header) {
  out << header << "\n" << "suite,check,value,lower,upper,pass\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", r.suite, r.check, r.value, r.lower, r.upper, r.pass ? 1 : 0);
  }
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / scale;
}

double gradcheck(std::span<Tensor> leaves, const std::function<Tensor()>& f, std::uint64_t seed, double h) {
  const Tensor probe = f();
  Rng rng(seed);
  const Tensor weights = random_leaf(probe.shape(), rng).detach();

  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor loss = project(f(), weights);
    tape.backward(loss);
  }
  double worst = 0.0;
  for (auto& leaf : leaves) {
    const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
    auto values = leaf.values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      const double numeric = central_difference(
          [&](double v) {
            values[i] = v;
            return project(f(), weights).item();
          },
          orig, h);
      values[i] = orig;
      worst = std::max(worst, relative_error(analytic[i], numeric));
    }
  }
  return worst;
}

std::vector<CheckRow> run_gradcheck_suite(std::uint64_t seed, double tolerance) {
  std::vector<CheckRow> rows;
  Rng rng = Rng::stream(seed, 40);
  std::uint64_t probe_seed = seed;
  auto check = [&](const std::string& name, std::vector<Tensor> leaves, const std::function<Tensor()>& f) {
    rows.push_back(make_check("gradcheck", name, gradcheck(leaves, f, ++probe_seed), 0.0, tolerance));
  };

  {
    Tensor a = random_leaf({3, 4}, rng), b = random_leaf({4}, rng);
    check("add", {a, b}, [=] { return add(a, b); });
  }
  {
    Tensor a = random_leaf({2, 3}, rng), b = random_leaf({2, 1}, rng);
    check("sub", {a, b}, [=] { return sub(a, b); });
  }
  {
    Tensor a = random_leaf({3, 4}, rng), b = random_leaf({3, 4}, rng);
    check("mul", {a, b}, [=] { return mul(a, b); });
  }
  {
    Tensor a = random_leaf({3, 4}, rng), b = random_leaf({1, 4}, rng, 0.5, 1.5);
    check("div", {a, b}, [=] { return div(a, b); });
  }
  {
    Tensor x = random_leaf({5}, rng);
    check("add_scalar", {x}, [=] { return add_scalar(x, 0.7); });
    check("mul_scalar", {x}, [=] { return mul_scalar(x, -1.3); });
    check("square", {x}, [=] { return square(x); });
  }
  {
    Tensor x = random_leaf({6}, rng, 0.5, 2.0);
    check("sqrt", {x}, [=] { return sqrt(x); });
  }
  {
    Tensor x = random_leaf({7}, rng, -3.0, 3.0);
    check("gelu", {x}, [=] { return gelu(x); });
  }
  {
    Tensor x = random_leaf({3, 5}, rng, -2.0, 2.0);
    check("softmax", {x}, [=] { return softmax(x); });
  }
  {
    Tensor a = random_leaf({3, 4}, rng), b = random_leaf({4, 2}, rng);
    check("matmul", {a, b}, [=] { return matmul(a, b); });
    Tensor c = random_leaf({2, 3, 4}, rng);
    check("matmul_batched", {c, b}, [=] { return matmul(c, b); });
  }
  {
    Tensor a = random_leaf({2, 3, 4}, rng), b = random_leaf({2, 4, 5}, rng);
    check("bmm", {a, b}, [=] { return bmm(a, b); });
  }
  {
    Tensor x = random_leaf({2, 3, 4}, rng), w = random_leaf({4, 3}, rng), b = random_leaf({3}, rng);
    check("linear", {x, w, b}, [=] { return linear(x, w, b); });
  }
  {
    Tensor x = random_leaf({2, 3, 4}, rng);
    check("permute", {x}, [=] { return permute(x, {2, 0, 1}); });
    check("reshape", {x}, [=] { return reshape(x, {4, 6}); });
    check("mean", {x}, [=] { return mean(x, 1); });
    check("sum_all", {x}, [=] { return sum_all(x); });
    check("mean_all", {x}, [=] { return mean_all(x); });
  }
  {
    Tensor x = random_leaf({2, 3}, rng);
    check("pad_front", {x}, [=] { return pad_front(x, 1, 2); });
  }
  {
    Tensor x = random_leaf({3, 5}, rng);
    check("slice", {x}, [=] { return slice(x, 1, 1, 3); });
  }
  {
    Tensor x = random_leaf({4, 3}, rng);
    const std::vector<std::size_t> idx{2, 0, 2, 3};
    check("take", {x}, [=] { return take(x, idx); });
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    const std::vector<double> w{0.3, 0.7, 0.15, 0.9};
    check("convex_mix", {x}, [=] { return convex_mix(x, perm, w); });
  }
  {
    Tensor x = random_leaf({2, 6, 3}, rng);
    check("mean_std", {x}, [=] {
      const MeanStd ms = mean_std(x, 1);
      return add(ms.mean, mul_scalar(ms.std, 1.7));
    });
  }
  {
    Tensor x = random_leaf({2, 5, 3}, rng), w = random_leaf({3, 3, 4}, rng), b = random_leaf({4}, rng);
    check("conv1d_same", {x, w, b}, [=] { return conv1d_same(x, w, b); });
  }
  {
    Tensor x = random_leaf({3, 4}, rng);
    check("dropout", {x}, [=] {
      Rng mask_rng(seed + 99);
      return dropout(x, 0.3, mask_rng, true);
    });
  }
  {
    Tensor x = random_leaf({2, 7}, rng);
    check("rdft", {x}, [=] {
      const Spectrum s = rdft(x);
      return add(s.re, mul_scalar(s.im, 0.6));
    });
  }
  {
    Rng init = Rng::stream(seed, 43);
    TimeEncoder enc = TimeEncoder::create(2, 3, 4, init);
    Tensor marks = random_leaf({5, 2}, rng, -0.5, 0.5);
    ParamList params;
    enc.collect("enc", params);
    std::vector<Tensor> leaves{marks};
    for (auto& p : params) leaves.push_back(p.tensor);
    check("time_encode", leaves, [=] { return time_encode(enc, marks); });

    Codebook cb{random_leaf({6, 3}, rng)};
    Tensor x_marks = random_leaf({2, 8, 2}, rng, -0.5, 0.5);
    const std::vector<std::size_t> t_end{30, 41};
    leaves = {cb.table, x_marks};
    for (auto& p : params) leaves.push_back(p.tensor);
    check("build_history_anchor", leaves, [=] { return build_history_anchor(cb, enc, t_end, x_marks, 24); });
    check("build_future_anchor_lookup", leaves, [=] {
      return build_future_anchor_lookup(cb, enc, t_end, reshape(slice(x_marks, 1, 0, 5), {2, 5, 2}), 24);
    });
  }
  {
    Tensor x = random_leaf({2, 8, 2}, rng, -2.0, 2.0), a = random_leaf({2, 8, 2}, rng);
    check("disentangle_normalize", {x, a}, [=] {
      const Normalized n = disentangle_normalize(x, a);
      return add(n.x_tilde, add(n.state.mu, mul_scalar(n.state.sigma, 0.4)));
    });
    Tensor y0 = random_leaf({2, 5, 2}, rng), ay = random_leaf({2, 5, 2}, rng);
    Tensor mu = random_leaf({2, 1, 2}, rng), sigma = random_leaf({2, 1, 2}, rng, 0.5, 2.0);
    check("denorm_with_stats", {y0, ay, mu, sigma}, [=] { return denorm_with_stats(y0, ay, mu, sigma); });
  }
  {
    Rng init = Rng::stream(seed, 44);
    MlpBackbone bb(8, 6, 5, 0.2, init);
    Tensor x = random_leaf({2, 8, 2}, rng);
    ParamList params;
    bb.collect("bb", params);
    std::vector<Tensor> leaves{x};
    for (auto& p : params) leaves.push_back(p.tensor);
    check("backbone_mlp", leaves, [=, &bb] {
      Rng mask_rng(seed + 7);
      return bb.forward(x, true, mask_rng);
    });
  }
  {
    Rng init = Rng::stream(seed, 45);
    Linear proj = Linear::create(3, 5, init);
    Tensor seq = random_leaf({2, 10, 2}, rng);
    check("tokenize", {seq, proj.weight, proj.bias}, [=] { return tokenize(seq, 4, proj); });

    AttentionBlock block = AttentionBlock::create(4, init);
    Tensor q = random_leaf({2, 3, 4}, rng), kv = random_leaf({2, 3, 4}, rng);
    ParamList params;
    block.collect("attn", params);
    std::vector<Tensor> leaves{q, kv};
    for (auto& p : params) leaves.push_back(p.tensor);
    check("cross_attention", leaves, [=] { return cross_attention(q, kv, block); });
  }
  {
    Rng init = Rng::stream(seed, 46);
    const PhaseRouter router = PhaseRouter::create(24, 24, 6, 4, false, init);
    Tensor ax = random_leaf({1, 24, 1}, rng), y0 = random_leaf({1, 24, 1}, rng), enc = random_leaf({1, 24, 1}, rng);
    ParamList params;
    router.collect("router", params);
    std::vector<Tensor> leaves{ax, y0, enc};
    for (auto& p : params) leaves.push_back(p.tensor);
    check("route", leaves, [=] { return router.route(ax, y0, enc); });
  }
  {
    Tensor pred = random_leaf({1, 6, 1}, rng);
    const Tensor target = random_leaf({1, 6, 1}, rng).detach();
    check("freq_mae", {pred}, [=] { return freq_mae(pred, target); });
  }

  const TinySetup setup = tiny_setup(seed);
  const double h = 1e-4;
  rows.push_back(make_check("gradcheck", "train_graph_full", gradcheck_training_graph(setup, {}, seed, h), 0.0,
                            tolerance));
  rows.push_back(make_check("gradcheck", "train_graph_naive_mix",
                            gradcheck_training_graph(setup, {true, true, true, false}, seed, h), 0.0, tolerance));
  rows.push_back(make_check("gradcheck", "train_graph_lookup",
                            gradcheck_training_graph(setup, {true, false, true, true}, seed, h), 0.0, tolerance));
  return rows;
}

Prop31Report check_prop31(Rng& rng, std::size_t length, double sigma_anchor, double sigma_residual,
                          std::size_t trials) {
  if (!(sigma_anchor > 0.0) || !(sigma_residual > 0.0)) throw NumericError("check_prop31: sigmas must be positive");
  if (length < 4) throw ShapeError("check_prop31: length must be >= 4");
  if (trials == 0) throw ShapeError("check_prop31: at least one trial");
  Prop31Report rep;
  rep.sigma_anchor = sigma_anchor;
  rep.sigma_residual = sigma_residual;
  rep.trials = trials;
  rep.min_scaled_std = std::numeric_limits<double>::infinity();
  rep.max_scaled_std = 0.0;
  std::vector<double> std_norms, ours_norms, ours_scaled;
  const double h = 1e-6;

  for (std::size_t trial = 0; trial < trials; ++trial) {
    std::vector<double> anchor(length), residual(length);
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double period = 4.0 + static_cast<double>(rng.uniform_int(length / 2));
    for (std::size_t t = 0; t < length; ++t) {
      anchor[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
    }
    rescale(anchor, sigma_anchor);
    for (auto& v : residual) v = rng.normal();
    const double mean_r = std::accumulate(residual.begin(), residual.end(), 0.0) / static_cast<double>(length);
    for (auto& v : residual) v -= mean_r;
    const double proj = std::inner_product(residual.begin(), residual.end(), anchor.begin(), 0.0) /
                        std::inner_product(anchor.begin(), anchor.end(), anchor.begin(), 0.0);
    for (std::size_t t = 0; t < length; ++t) residual[t] -= proj * anchor[t];
    rescale(residual, sigma_residual);

    const SeriesMap standard = [&anchor](const std::vector<double>& r) {
      std::vector<double> x(r.size());
      for (std::size_t t = 0; t < r.size(); ++t) x[t] = anchor[t] + r[t];
      return revin(x);
    };
    const SeriesMap residual_only = [&anchor](const std::vector<double>& r) {
      std::vector<double> out = revin(r);
      for (std::size_t t = 0; t < r.size(); ++t) out[t] += anchor[t];
      return out;
    };
    const double n_std = spectral_norm(numeric_jacobian(standard, residual, h), length, length, rng);
    const double n_ours = spectral_norm(numeric_jacobian(residual_only, residual, h), length, length, rng);
    std::vector<double> x(length);
    for (std::size_t t = 0; t < length; ++t) x[t] = anchor[t] + residual[t];
    const double scaled = n_std * population_std(x);
    rep.min_scaled_std = std::min(rep.min_scaled_std, scaled);
    rep.max_scaled_std = std::max(rep.max_scaled_std, scaled);
    std_norms.push_back(n_std);
    ours_norms.push_back(n_ours);
    ours_scaled.push_back(n_ours * sigma_residual);
  }
  rep.median_std_norm = median(std_norms);
  rep.median_ours_norm = median(ours_norms);
  rep.ratio = rep.median_ours_norm / rep.median_std_norm;

  const double predicted = sigma_anchor / sigma_residual;
  const std::string tag = fmt::format("sA={}_sR={}", sigma_anchor, sigma_residual);
  rep.rows.push_back(make_check("prop31", "norm_ratio_" + tag, rep.ratio, 0.5 * predicted, 2.0 * predicted));
  rep.rows.push_back(make_check("prop31", "min_std_norm_times_sigma_x_" + tag, rep.min_scaled_std, 0.5, 2.0));
  rep.rows.push_back(make_check("prop31", "max_std_norm_times_sigma_x_" + tag, rep.max_scaled_std, 0.5, 2.0));
  rep.rows.push_back(make_check("prop31", "min_ours_norm_times_sigma_r_" + tag,
                                *std::min_element(ours_scaled.begin(), ours_scaled.end()), 0.5, 2.0));
  rep.rows.push_back(make_check("prop31", "max_ours_norm_times_sigma_r_" + tag,
                                *std::max_element(ours_scaled.begin(), ours_scaled.end()), 0.5, 2.0));
  return rep;
}

std::vector<MixCell> default_mix_grid() {
  std::vector<MixCell> grid;
  for (const auto& [si, sj] : {std::pair{1.0, 1.0}, std::pair{2.0, 1.0}}) {
    for (double rho : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      for (double lambda : {0.25, 0.5, 0.75}) grid.push_back({si, sj, rho, lambda});
    }
  }
  grid.push_back({2.0, 1.0, -1.0, 1.0 / 3.0});
  return grid;
}

std::vector<Thm32Cell> check_thm32(Rng& rng, std::span<const MixCell> grid, std::size_t signal_len,
                                   std::size_t trials) {
  if (signal_len < 2 || trials < 2) throw ShapeError("check_thm32: need signal_len >= 2 and trials >= 2");
  std::vector<Thm32Cell> out;
  std::vector<double> ri(signal_len), rj(signal_len), mixed(signal_len);
  for (const auto& cell : grid) {
    Thm32Cell res;
    res.cell = cell;
    res.expected = collapse_ratio(cell.sigma_i, cell.sigma_j, cell.rho, cell.lambda);
    const double sigma_ours = cell.lambda * cell.sigma_i + (1.0 - cell.lambda) * cell.sigma_j;
    res.lower_bound_holds = sigma_ours >= std::min(cell.sigma_i, cell.sigma_j);
    const double coupling = std::sqrt(std::max(0.0, 1.0 - cell.rho * cell.rho));
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      for (std::size_t t = 0; t < signal_len; ++t) {
        ri[t] = rng.normal();
        rj[t] = cell.rho * ri[t] + coupling * rng.normal();
      }
      rescale(ri, cell.sigma_i);
      rescale(rj, cell.sigma_j);
      for (std::size_t t = 0; t < signal_len; ++t) mixed[t] = cell.lambda * ri[t] + (1.0 - cell.lambda) * rj[t];
      const double sigma_naive = population_std(mixed);
      res.max_sigma_naive = std::max(res.max_sigma_naive, sigma_naive);
      const double r = (sigma_naive / sigma_ours) * (sigma_naive / sigma_ours);
      sum += r;
      sum_sq += r * r;
    }
    const double n = static_cast<double>(trials);
    res.measured = sum / n;
    const double var = std::max(0.0, (sum_sq - n * res.measured * res.measured) / (n - 1.0));
    res.std_error = std::sqrt(var / n);
    res.pass = res.lower_bound_holds && std::abs(res.measured - res.expected) <= 3.0 * res.std_error + 1e-10;
    const bool collapse_cell =
        cell.rho == -1.0 && std::abs(cell.lambda - cell.sigma_j / (cell.sigma_i + cell.sigma_j)) < 1e-12;
    if (collapse_cell) res.pass = res.pass && res.max_sigma_naive < 1e-6;
    out.push_back(res);
  }
  return out;
}

std::vector<CheckRow> thm32_rows(std::span<const Thm32Cell> cells) {
  std::vector<CheckRow> rows;
  for (const auto& c : cells) {
    const std::string tag =
        fmt::format("si={}_sj={}_rho={}_lambda={:.6g}", c.cell.sigma_i, c.cell.sigma_j, c.cell.rho, c.cell.lambda);
    const double band = 3.0 * c.std_error + 1e-10;
    rows.push_back(make_check("thm32", "collapse_ratio_" + tag, c.measured, c.expected - band, c.expected + band));
    const double sigma_ours = c.cell.lambda * c.cell.sigma_i + (1.0 - c.cell.lambda) * c.cell.sigma_j;
    rows.push_back(make_check("thm32", "mixed_sigma_lower_bound_" + tag,
                              sigma_ours - std::min(c.cell.sigma_i, c.cell.sigma_j), 0.0,
                              std::numeric_limits<double>::infinity()));
    const bool collapse_cell =
        c.cell.rho == -1.0 && std::abs(c.cell.lambda - c.cell.sigma_j / (c.cell.sigma_i + c.cell.sigma_j)) < 1e-12;
    if (collapse_cell) rows.push_back(make_check("thm32", "naive_sigma_collapse_" + tag, c.max_sigma_naive, 0.0, 1e-6));
  }
  return rows;
}

std::vector<CheckRow> check_beta(Rng& rng, std::size_t samples) {
  std::vector<CheckRow> rows;
  double sum = 0.0, tails = 0.0, centre = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double l = sample_beta(rng, 0.15, 0.15);
    sum += l;
    if (l < 0.1 || l > 0.9) tails += 1.0;
    if (l >= 0.45 && l <= 0.55) centre += 1.0;
  }
  const double n = static_cast<double>(samples);
  rows.push_back(make_check("beta", "mean_alpha_0.15", sum / n, 0.49, 0.51));
  rows.push_back(make_check("beta", "tail_minus_centre_mass_alpha_0.15", (tails - centre) / n, 1e-12, 1.0));

  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double l = sample_beta(rng, 1.0, 1.0);
    s1 += l;
    s2 += l * l;
  }
  const double mean = s1 / n;
  rows.push_back(make_check("beta", "variance_alpha_1", s2 / n - mean * mean, 1.0 / 12.0 - 0.002, 1.0 / 12.0 + 0.002));
  return rows;
}

std::vector<CheckRow> check_complexity(std::span<const std::size_t> patches, std::span<const std::size_t> lookbacks,
                                       std::size_t horizon, std::size_t width) {
  std::vector<CheckRow> rows;
  if (patches.empty() || lookbacks.size() < 3) throw ShapeError("check_complexity: need patches and >= 3 lookbacks");
  for (std::size_t p : patches) {
    std::vector<RouterOpCount> counts;
    for (std::size_t t : lookbacks) counts.push_back(count_router_ops(p, width, t, horizon));
    std::uint64_t lo = counts.front().attention, hi = lo;
    for (const auto& c : counts) {
      lo = std::min(lo, c.attention);
      hi = std::max(hi, c.attention);
    }
    rows.push_back(make_check("complexity", fmt::format("attention_spread_over_T_P={}", p),
                              static_cast<double>(hi - lo), 0.0, 0.0));
    // Affine in T: every consecutive slope equals the first one (exact integer test).
    double worst = 0.0;
    const auto t0 = static_cast<std::int64_t>(lookbacks[0]), t1 = static_cast<std::int64_t>(lookbacks[1]);
    const auto c0 = static_cast<std::int64_t>(counts[0].total()), c1 = static_cast<std::int64_t>(counts[1].total());
    for (std::size_t i = 2; i < lookbacks.size(); ++i) {
      const auto ti = static_cast<std::int64_t>(lookbacks[i]);
      const auto ci = static_cast<std::int64_t>(counts[i].total());
      worst = std::max(worst, static_cast<double>(std::llabs((ci - c0) * (t1 - t0) - (c1 - c0) * (ti - t0))));
    }
    rows.push_back(make_check("complexity", fmt::format("total_affine_residual_P={}", p), worst, 0.0, 0.0));
  }
  const std::size_t p0 = patches.front();
  const auto a0 = count_router_ops(p0, width, lookbacks.front(), horizon).attention;
  for (std::size_t p : patches) {
    const auto a = count_router_ops(p, width, lookbacks.front(), horizon).attention;
    const double defect = std::abs(static_cast<double>(a * p0 * p0) - static_cast<double>(a0 * p * p));
    rows.push_back(make_check("complexity", fmt::format("attention_quadratic_in_P_P={}", p), defect, 0.0, 0.0));
    const auto doubled = count_router_ops(2 * p, width, lookbacks.front(), horizon).attention;
    rows.push_back(make_check("complexity", fmt::format("attention_doubling_factor_P={}", p),
                              static_cast<double>(doubled) / static_cast<double>(a), 4.0, 4.0));
  }
  return rows;
}

std::vector<CheckRow> run_verify(const std::string& suite, std::uint64_t seed) {
  const bool all = suite == "all";
  if (!all && suite != "prop31" && suite != "thm32" && suite != "gradcheck" && suite != "beta" &&
      suite != "complexity") {
    throw ConfigError(fmt::format("unknown verify suite '{}' (prop31, thm32, gradcheck, beta, complexity, all)", suite));
  }
  std::vector<CheckRow> rows;
  auto append = [&rows](std::vector<CheckRow> more) { rows.insert(rows.end(), more.begin(), more.end()); };
  if (all || suite == "gradcheck") append(run_gradcheck_suite(seed));
  if (all || suite == "prop31") {
    Rng rng = Rng::stream(seed, 31);
    append(check_prop31(rng, 32, 100.0, 1.0, 50).rows);
    append(check_prop31(rng, 32, 1.0, 1.0, 20).rows);
  }
  if (all || suite == "thm32") {
    Rng rng = Rng::stream(seed, 32);
    const auto grid = default_mix_grid();
    append(thm32_rows(check_thm32(rng, grid, 1000, 100)));
  }
  if (all || suite == "beta") {
    Rng rng = Rng::stream(seed, 33);
    append(check_beta(rng));
  }
  if (all || suite == "complexity") {
    const std::vector<std::size_t> patches{4, 8, 12, 24}, lookbacks{96, 192, 336, 720};
    append(check_complexity(patches, lookbacks));
  }
  return rows;
}

}  // namespace pulse
