// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rank4class/error.hpp"

namespace rank4class {

/// Binary relevance over n classes with exactly one relevant class.
class LabelVector {
 public:
  explicit LabelVector(std::vector<int> y) : y_(std::move(y)) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      if (y_[i] != 0 && y_[i] != 1) throw UsageError("label entries must be 0 or 1");
      if (y_[i] == 1) {
        ++ones;
        correct_ = i;
      }
    }
    if (ones != 1) {
      throw UsageError("label vector needs exactly one 1, found " + std::to_string(ones));
    }
  }

  static LabelVector one_hot(std::size_t n, std::size_t correct) {
    if (correct >= n) throw UsageError("one_hot: class index out of range");
    std::vector<int> y(n, 0);
    y[correct] = 1;
    return LabelVector(std::move(y));
  }

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t correct() const noexcept { return correct_; }
  int operator[](std::size_t i) const { return y_.at(i); }

 private:
  std::vector<int> y_;
  std::size_t correct_ = 0;
};

/// Class indices ordered best first: order[0] is the top-ranked class.
class Ranking {
 public:
  explicit Ranking(std::vector<std::size_t> order) : order_(std::move(order)) {
    std::vector<bool> seen(order_.size(), false);
    for (std::size_t c : order_) {
      if (c >= order_.size() || seen[c]) throw UsageError("ranking is not a permutation");
      seen[c] = true;
    }
  }

  std::size_t size() const noexcept { return order_.size(); }
  /// Class at 1-based position i.
  std::size_t at_position(std::size_t i) const { return order_.at(i - 1); }
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  /// 1-based position of class c.
  std::size_t position_of(std::size_t c) const {
    const auto it = std::find(order_.begin(), order_.end(), c);
    if (it == order_.end()) throw UsageError("class not in ranking");
    return static_cast<std::size_t>(it - order_.begin()) + 1;
  }

 private:
  std::vector<std::size_t> order_;
};

/// Descending score order; equal scores keep the lower class index first.
inline Ranking rank_classes(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  return Ranking(std::move(order));
}

namespace detail {

inline void check_cutoff(const Ranking& ranking, const LabelVector& labels, std::size_t k) {
  if (ranking.size() != labels.size()) {
    throw UsageError("ranking covers " + std::to_string(ranking.size()) +
                     " classes but labels cover " + std::to_string(labels.size()));
  }
  if (k < 1 || k > ranking.size()) {
    throw UsageError("cutoff K=" + std::to_string(k) + " outside [1, " +
                     std::to_string(ranking.size()) + "]");
  }
}

inline double discounted_gain(int relevance, std::size_t position) {
  return (std::exp2(static_cast<double>(relevance)) - 1.0) /
         std::log2(1.0 + static_cast<double>(position));
}

}  // namespace detail

/// Number of relevant classes in the top K (0 or 1 here). Error is 1 minus this.
inline double top_k_accuracy(const Ranking& ranking, const LabelVector& labels, std::size_t k) {
  detail::check_cutoff(ranking, labels, k);
  double hits = 0.0;
  for (std::size_t i = 1; i <= k; ++i) hits += labels[ranking.at_position(i)];
  return hits;
}

/// DCG@K of the ranking over DCG@K of the label-sorted ranking, gain 2^y - 1,
/// discount 1/log2(1 + position).
inline double ndcg_at_k(const Ranking& ranking, const LabelVector& labels, std::size_t k) {
  detail::check_cutoff(ranking, labels, k);
  double dcg = 0.0;
  for (std::size_t i = 1; i <= k; ++i) {
    dcg += detail::discounted_gain(labels[ranking.at_position(i)], i);
  }
  std::vector<int> ideal(labels.size());
  for (std::size_t c = 0; c < labels.size(); ++c) ideal[c] = labels[c];
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double ideal_dcg = 0.0;
  for (std::size_t i = 1; i <= k; ++i) ideal_dcg += detail::discounted_gain(ideal[i - 1], i);
  return dcg / ideal_dcg;
}

/// Reciprocal rank of the correct class.
inline double mrr(const Ranking& ranking, const LabelVector& labels) {
  detail::check_cutoff(ranking, labels, 1);
  return 1.0 / static_cast<double>(ranking.position_of(labels.correct()));
}

inline double precision_at_k(const Ranking& ranking, const LabelVector& labels,
                             std::size_t k) {
  return top_k_accuracy(ranking, labels, k) / static_cast<double>(k);
}

/// Probability p_i that the correct class lands at position i (1-based i = index + 1).
class PositionDistribution {
 public:
  explicit PositionDistribution(std::vector<double> p) : p_(std::move(p)) {
    if (p_.empty()) throw UsageError("position distribution is empty");
    double total = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw UsageError("position probabilities must be finite and nonnegative");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw UsageError("position probabilities sum to " + std::to_string(total));
    }
  }

  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_.at(i); }
  std::span<const double> probabilities() const noexcept { return p_; }

 private:
  std::vector<double> p_;
};

/// Entropies (bits) of the NDCG@K and acc@K values when the correct class's
/// position is drawn from a PositionDistribution.
struct MetricEntropy {
  double ndcg_bits = 0.0;
  double accuracy_bits = 0.0;
};

namespace detail {

inline double entropy_term(double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; }

}  // namespace detail

inline MetricEntropy metric_entropy(const PositionDistribution& dist, std::size_t k) {
  if (k < 1 || k > dist.size()) throw UsageError("metric_entropy: K out of range");
  // NDCG@K takes K distinct values inside the cutoff plus 0 outside it; acc@K
  // collapses the inside values into one.
  double inside = 0.0;
  double ndcg_bits = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    inside += dist[i];
    ndcg_bits += detail::entropy_term(dist[i]);
  }
  double outside = 0.0;
  for (std::size_t i = k; i < dist.size(); ++i) outside += dist[i];
  ndcg_bits += detail::entropy_term(outside);
  const double accuracy_bits = detail::entropy_term(inside) + detail::entropy_term(outside);
  return {ndcg_bits, accuracy_bits};
}

}  // namespace rank4class
