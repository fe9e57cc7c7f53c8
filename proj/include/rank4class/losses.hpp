// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/ops.hpp"
#include "rank4class/random.hpp"
#include "rank4class/tape.hpp"

namespace rank4class {

enum class LossKind { kSoftmaxCe, kPairLogistic, kApproxNdcg, kGumbelApproxNdcg, kMse };

inline constexpr std::array<LossKind, 5> kAllLosses = {
    LossKind::kSoftmaxCe, LossKind::kPairLogistic, LossKind::kApproxNdcg,
    LossKind::kGumbelApproxNdcg, LossKind::kMse};

inline std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::kSoftmaxCe: return "softmax_ce";
    case LossKind::kPairLogistic: return "pair_logistic";
    case LossKind::kApproxNdcg: return "approx_ndcg";
    case LossKind::kGumbelApproxNdcg: return "gumbel_approx_ndcg";
    case LossKind::kMse: return "mse";
  }
  return "?";
}

inline LossKind parse_loss(std::string_view name) {
  for (LossKind kind : kAllLosses) {
    if (loss_name(kind) == name) return kind;
  }
  std::string valid;
  for (LossKind kind : kAllLosses) {
    valid += (valid.empty() ? "" : ", ") + std::string(loss_name(kind));
  }
  throw UsageError("unknown loss '" + std::string(name) + "' (valid: " + valid + ")");
}

struct LossParams {
  LossKind kind = LossKind::kSoftmaxCe;
  double sigma = 1.0;
  double alpha = 10.0;
  std::size_t gumbel_samples = 8;
  double gumbel_scale = 1.0;
  double mse_target = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma > 0.0)) throw UsageError("sigma must be positive");
    if (!(alpha > 0.0)) throw UsageError("alpha must be positive");
    if (gumbel_samples < 1) throw UsageError("gumbel sample count must be at least 1");
    if (!(gumbel_scale >= 0.0)) throw UsageError("gumbel scale must be nonnegative");
    if (!(mse_target >= 1.0)) throw UsageError("mse target must be at least 1");
  }
};

namespace detail {

inline void check_label(Var scores, std::size_t correct, const char* op) {
  require_rank(scores, 1, op);
  if (correct >= scores.value().size()) {
    throw UsageError(std::string(op) + ": correct class " + std::to_string(correct) +
                     " out of range for " + std::to_string(scores.value().size()) +
                     " classes");
  }
}

}  // namespace detail

/// -log softmax(s)[correct], via log-sum-exp.
inline Var softmax_ce(Var scores, std::size_t correct) {
  detail::check_label(scores, correct, "softmax_ce");
  return sub(log_sum_exp(scores), pick(scores, correct));
}

/// sum over incorrect j of log(1 + exp(-sigma (s_correct - s_j))).
///
/// With one relevant class the double sum over (i, j) pairs with y_i > y_j has
/// exactly the n - 1 (correct, j) terms, so this is linear in n.
inline Var pair_logistic(Var scores, std::size_t correct, double sigma = 1.0) {
  detail::check_label(scores, correct, "pair_logistic");
  if (!(sigma > 0.0)) throw UsageError("pair_logistic: sigma must be positive");
  Tape& tape = *scores.tape;
  const std::size_t n = scores.value().size();
  std::vector<double> mask(n, 1.0);
  mask[correct] = 0.0;
  Var gaps = sub(scores, broadcast(pick(scores, correct), n));
  return sum(mul(softplus(scale(gaps, sigma)), tape.constant(Tensor::vector(mask))));
}

/// Smoothed rank 1 + sum_{j != i} sigmoid(alpha (s_j - s_i)) for every i.
inline Var approx_rank(Var scores, double alpha) {
  detail::require_rank(scores, 1, "approx_rank");
  if (!(alpha > 0.0)) throw UsageError("approx_rank: alpha must be positive");
  // The diagonal contributes sigmoid(0) = 1/2, hence +1/2 rather than +1.
  return add_scalar(row_sums(sigmoid(scale(outer_diff(scores), alpha))), 0.5);
}

namespace detail {

/// Smoothed rank of one class, in O(n).
inline Var approx_rank_of(Var scores, std::size_t index, double alpha) {
  const std::size_t n = scores.value().size();
  Var gaps = sub(scores, broadcast(pick(scores, index), n));
  return add_scalar(sum(sigmoid(scale(gaps, alpha))), 0.5);
}

}  // namespace detail

/// 1 - NDCG over the full list with ranks replaced by approx_rank. With a
/// single relevant class the ideal DCG is 1, leaving 1 - 1/log2(1 + rank).
inline Var approx_ndcg_loss(Var scores, std::size_t correct, double alpha = 10.0) {
  detail::check_label(scores, correct, "approx_ndcg_loss");
  if (!(alpha > 0.0)) throw UsageError("approx_ndcg_loss: alpha must be positive");
  Var rank = detail::approx_rank_of(scores, correct, alpha);
  Var log2_term = scale(log(add_scalar(rank, 1.0)), 1.0 / std::numbers::ln2);
  return add_scalar(scale(reciprocal(log2_term), -1.0), 1.0);
}

/// approx_ndcg_loss averaged over `samples` copies of the scores, each shifted
/// by scale * (i.i.d. standard Gumbel noise) drawn from Rng(seed).
inline Var gumbel_approx_ndcg(Var scores, std::size_t correct, double alpha,
                              std::size_t samples, double noise_scale, std::uint64_t seed) {
  detail::check_label(scores, correct, "gumbel_approx_ndcg");
  if (samples < 1) throw UsageError("gumbel_approx_ndcg: need at least one sample");
  if (!(noise_scale >= 0.0)) throw UsageError("gumbel_approx_ndcg: negative scale");
  // No noise means every sample is the same deterministic loss.
  if (noise_scale == 0.0) return approx_ndcg_loss(scores, correct, alpha);
  Tape& tape = *scores.tape;
  const std::size_t n = scores.value().size();
  Rng rng(seed);
  std::vector<Var> per_sample;
  per_sample.reserve(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    std::vector<double> noise(n);
    for (double& g : noise) g = noise_scale * rng.gumbel();
    Var perturbed = add(scores, tape.constant(Tensor::vector(std::move(noise))));
    per_sample.push_back(approx_ndcg_loss(perturbed, correct, alpha));
  }
  return mean(stack(per_sample));
}

/// sum_i (s_i - target * y_i)^2. target > 1 is the rescaled variant.
inline Var mse_loss(Var scores, std::size_t correct, double target = 1.0) {
  detail::check_label(scores, correct, "mse_loss");
  if (!(target >= 1.0)) throw UsageError("mse_loss: target must be at least 1");
  std::vector<double> goal(scores.value().size(), 0.0);
  goal[correct] = target;
  return sum(square(sub(scores, scores.tape->constant(Tensor::vector(std::move(goal))))));
}

/// Dispatch on params.kind. `seed` feeds the Gumbel sampler only.
inline Var ranking_loss(Var scores, std::size_t correct, const LossParams& params,
                        std::uint64_t seed) {
  switch (params.kind) {
    case LossKind::kSoftmaxCe: return softmax_ce(scores, correct);
    case LossKind::kPairLogistic: return pair_logistic(scores, correct, params.sigma);
    case LossKind::kApproxNdcg: return approx_ndcg_loss(scores, correct, params.alpha);
    case LossKind::kGumbelApproxNdcg:
      return gumbel_approx_ndcg(scores, correct, params.alpha, params.gumbel_samples,
                                params.gumbel_scale, seed);
    case LossKind::kMse: return mse_loss(scores, correct, params.mse_target);
  }
  throw UsageError("unhandled loss kind");
}

inline Var ranking_loss(Var scores, std::size_t correct, const LossParams& params) {
  return ranking_loss(scores, correct, params, params.seed);
}

/// Forward value of a loss on plain scores.
inline double loss_value(std::span<const double> scores, std::size_t correct,
                         const LossParams& params) {
  Tape tape;
  Var s = tape.constant(Tensor::vector({scores.begin(), scores.end()}));
  return ranking_loss(s, correct, params).value().item();
}

/// Loss value and d(loss)/d(scores).
struct LossAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

inline LossAndGrad loss_and_grad(std::span<const double> scores, std::size_t correct,
                                 const LossParams& params) {
  Tape tape;
  Var s = tape.parameter(Tensor::vector({scores.begin(), scores.end()}));
  Var loss = ranking_loss(s, correct, params);
  tape.backward(loss);
  const auto g = tape.grad(s).data();
  return {loss.value().item(), std::vector<double>(g.begin(), g.end())};
}

/// Plain-vector approx_rank.
inline std::vector<double> approx_rank_values(std::span<const double> scores, double alpha) {
  Tape tape;
  Var r = approx_rank(tape.constant(Tensor::vector({scores.begin(), scores.end()})), alpha);
  const auto v = r.value().data();
  return {v.begin(), v.end()};
}

}  // namespace rank4class
