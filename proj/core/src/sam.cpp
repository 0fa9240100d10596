// Copyright 2026 The PULSE Authors
// SPDX-License-Identifier: Apache-2.0

#include "pulse/sam.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

#include "pulse/error.hpp"

namespace pulse {

MixPlan make_plan(Rng& rng, std::size_t batch_size, double alpha, const AblationFlags& flags, bool per_sample,
                  std::optional<double> force_lambda) {
  if (batch_size == 0) throw ShapeError("make_plan: empty batch");
  MixPlan plan;
  plan.enabled = flags.use_sam;
  plan.statistic_aware = flags.statistic_aware;
  if (!plan.enabled) {
    plan.perm.resize(batch_size);
    std::iota(plan.perm.begin(), plan.perm.end(), std::size_t{0});
    plan.lambdas.assign(batch_size, 1.0);
    return plan;
  }
  if (!(alpha > 0.0)) throw ConfigError(fmt::format("mixup alpha must be positive, got {}", alpha));
  plan.perm = rng.permutation(batch_size);
  if (force_lambda) {
    if (!(*force_lambda >= 0.0 && *force_lambda <= 1.0)) throw ConfigError("forced lambda outside [0, 1]");
    plan.lambdas.assign(batch_size, *force_lambda);
  } else if (per_sample) {
    plan.lambdas.resize(batch_size);
    for (auto& l : plan.lambdas) l = sample_beta(rng, alpha, alpha);
  } else {
    plan.lambdas.assign(batch_size, sample_beta(rng, alpha, alpha));
  }
  return plan;
}

Tensor mix(const MixPlan& plan, const Tensor& q) {
  if (q.rank() == 0 || q.dim(0) != plan.size()) {
    throw ShapeError(fmt::format("mix: tensor {} for a plan over {} samples", shape_str(q.shape()), plan.size()));
  }
  if (!plan.enabled) return q;
  return convex_mix(q, plan.perm, plan.lambdas);
}

MixedBatch mix_batch(const MixPlan& plan, const Tensor& x_tilde, const Tensor& anchor_x, const Tensor& enc_y,
                     const NormState& state, const Tensor& y) {
  if (x_tilde.shape() != anchor_x.shape() || enc_y.shape() != y.shape()) {
    throw ShapeError(fmt::format("mix_batch: input {} / anchor {} / encoding {} / target {}", shape_str(x_tilde.shape()),
                                 shape_str(anchor_x.shape()), shape_str(enc_y.shape()), shape_str(y.shape())));
  }
  return {mix(plan, x_tilde), mix(plan, anchor_x), mix(plan, enc_y),
          mix(plan, state.mu), mix(plan, state.sigma), mix(plan, y)};
}

MeanStd naive_mix_stats(const Tensor& x_mix, const Tensor& anchor_mix) {
  if (x_mix.shape() != anchor_mix.shape()) {
    throw ShapeError(fmt::format("naive_mix_stats: {} vs {}", shape_str(x_mix.shape()), shape_str(anchor_mix.shape())));
  }
  return mean_std(sub(x_mix, anchor_mix), 1);
}

double collapse_ratio(double sigma_i, double sigma_j, double rho, double lambda) {
  if (!(sigma_i > 0.0) || !(sigma_j > 0.0)) throw NumericError("collapse_ratio: sigmas must be positive");
  if (!(rho >= -1.0 && rho <= 1.0)) throw NumericError(fmt::format("collapse_ratio: rho {} outside [-1, 1]", rho));
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw NumericError(fmt::format("collapse_ratio: lambda {} outside [0, 1]", lambda));
  }
  const double mixed = lambda * sigma_i + (1.0 - lambda) * sigma_j;
  return 1.0 - 2.0 * lambda * (1.0 - lambda) * sigma_i * sigma_j * (1.0 - rho) / (mixed * mixed);
}

double latent_sensitivity(const Tensor& target, const Tensor& anchor_y, double mu, double sigma) {
  if (!(sigma > 0.0)) throw NumericError("latent_sensitivity: sigma must be positive");
  Tape tape;
  TapeScope scope(tape);
  Tensor y = target.detach();
  y.set_requires_grad(true);
  const Tensor latent = add(mul_scalar(sub(add_scalar(y, -mu), anchor_y), 1.0 / sigma), anchor_y);
  tape.backward(sum_all(latent));
  double sq = 0.0;
  for (double g : y.grad()) sq += g * g;
  return std::sqrt(sq);
}

}  // namespace pulse
