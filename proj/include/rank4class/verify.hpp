// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/losses.hpp"
#include "rank4class/metrics.hpp"
#include "rank4class/random.hpp"

namespace rank4class {

using EntropyFn = std::function<MetricEntropy(const PositionDistribution&, std::size_t)>;

/// Deliberately wrong entropy: the NDCG side in nats, the accuracy side in bits.
inline MetricEntropy natural_log_entropy_fault(const PositionDistribution& dist, std::size_t k) {
  MetricEntropy h = metric_entropy(dist, k);
  h.ndcg_bits *= std::numbers::ln2;
  return h;
}

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t cases = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::string counterexample;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

namespace detail {

inline std::string dump(std::span<const double> v) {
  std::ostringstream out;
  out.precision(17);
  out << '[';
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << v[i];
  out << ']';
  return out.str();
}

inline void fail(CheckResult& c, std::string what) {
  if (c.passed) c.counterexample = std::move(what);
  c.passed = false;
}

/// Random position distribution on n positions. Some draws zero out most of
/// the mass or concentrate it on one position.
inline std::vector<double> random_positions(Rng& rng, std::size_t n) {
  std::vector<double> p(n, 0.0);
  const double style = rng.uniform01();
  if (style < 0.1) {
    p[rng.below(n)] = 1.0;
    return p;
  }
  const double keep = style < 0.4 ? 0.3 : 1.0;
  double total = 0.0;
  for (double& v : p) {
    v = rng.uniform01() < keep ? -std::log(rng.uniform_open()) : 0.0;
    total += v;
  }
  if (total == 0.0) {
    p[rng.below(n)] = 1.0;
    return p;
  }
  for (double& v : p) v /= total;
  return p;
}

inline std::vector<double> random_score_vector(Rng& rng, std::size_t n) {
  static constexpr double kSpreads[] = {0.05, 1.0, 5.0, 20.0};
  const double spread = kSpreads[rng.below(4)];
  const bool coarse = rng.uniform01() < 0.1;
  std::vector<double> s(n);
  for (double& v : s) {
    v = spread * rng.normal();
    if (coarse) v = std::round(v);
  }
  return s;
}

inline Ranking random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  return Ranking(order);
}

}  // namespace detail

/// NDCG@K entropy never below acc@K entropy; strictly above once two
/// positions inside the cutoff carry mass. Margin: smallest strict-case gap.
inline CheckResult check_entropy_order(Rng& rng, std::size_t trials, const EntropyFn& entropy) {
  CheckResult c;
  c.name = "entropy_order";
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 2 + rng.below(19);
    const std::vector<double> p = detail::random_positions(rng, n);
    const PositionDistribution dist(p);
    std::size_t inside = 0;
    for (std::size_t k = 1; k <= n; ++k) {
      if (p[k - 1] > 1e-6) ++inside;
      const MetricEntropy h = entropy(dist, k);
      const double gap = h.ndcg_bits - h.accuracy_bits;
      ++c.cases;
      const bool strict = inside >= 2;
      if (strict) c.min_margin = std::min(c.min_margin, gap);
      if (gap < -1e-12 || (strict && !(gap > 0.0))) {
        detail::fail(c, "K=" + std::to_string(k) + " p=" + detail::dump(p) +
                            " h_ndcg=" + std::to_string(h.ndcg_bits) +
                            " h_acc=" + std::to_string(h.accuracy_bits));
      }
    }
  }
  return c;
}

/// RR >= exp(-ce) and full-list NDCG >= 1/log2(1 + e^ce) for the correct
/// class's softmax cross-entropy ce.
inline CheckResult check_ce_bounds(Rng& rng, std::size_t trials) {
  CheckResult c;
  c.name = "ce_bounds";
  const double slack = 1.0 - 1e-12;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 2 + rng.below(49);
    const std::vector<double> s = detail::random_score_vector(rng, n);
    const std::size_t correct = rng.below(n);
    const double ce = loss_value(s, correct, LossParams{});
    const Ranking ranking = rank_classes(s);
    const LabelVector y = LabelVector::one_hot(n, correct);
    const double rr = mrr(ranking, y);
    const double ndcg = ndcg_at_k(ranking, y, n);
    const double rr_bound = std::exp(-ce);
    const double ndcg_bound = 1.0 / std::log2(1.0 + std::exp(ce));
    ++c.cases;
    c.min_margin = std::min({c.min_margin, rr - rr_bound, ndcg - ndcg_bound});
    if (rr < rr_bound * slack || ndcg < ndcg_bound * slack) {
      detail::fail(c, "scores=" + detail::dump(s) + " correct=" + std::to_string(correct) +
                          " ce=" + std::to_string(ce));
    }
  }
  return c;
}

/// NDCG@1 == Top-1 and acc@K == min(1, K * P@K), exactly.
inline CheckResult check_metric_identities(Rng& rng, std::size_t trials) {
  CheckResult c;
  c.name = "metric_identities";
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 2 + rng.below(29);
    const Ranking r = detail::random_permutation(rng, n);
    const LabelVector y = LabelVector::one_hot(n, rng.below(n));
    double worst = std::abs(ndcg_at_k(r, y, 1) - top_k_accuracy(r, y, 1));
    for (std::size_t k = 1; k <= n; ++k) {
      const double lhs = top_k_accuracy(r, y, k);
      const double rhs = std::min(1.0, static_cast<double>(k) * precision_at_k(r, y, k));
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    ++c.cases;
    c.min_margin = std::min(c.min_margin, 0.0 - worst);
    if (worst != 0.0) {
      detail::fail(c, "n=" + std::to_string(n) + " correct at position " +
                          std::to_string(r.position_of(y.correct())));
    }
  }
  return c;
}

/// approx_rank with alpha = 1e4 on scores at least 0.1 apart is within 1e-6
/// of the true rank. Margin: 1e-6 minus the worst deviation.
inline CheckResult check_approx_rank_limit(Rng& rng, std::size_t trials) {
  CheckResult c;
  c.name = "approx_rank_limit";
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t n = 2 + rng.below(19);
    std::vector<double> s(n);
    double level = rng.uniform(-5.0, 5.0);
    for (double& v : s) {
      v = level;
      level += 0.1 + rng.uniform(0.0, 1.0);
    }
    rng.shuffle(std::span<double>(s));
    const std::vector<double> approx = approx_rank_values(s, 1e4);
    const Ranking exact = rank_classes(s);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(approx[i] - static_cast<double>(exact.position_of(i))));
    }
    ++c.cases;
    c.min_margin = std::min(c.min_margin, 1e-6 - worst);
    if (!(worst < 1e-6)) detail::fail(c, "scores=" + detail::dump(s));
  }
  return c;
}

/// Runs all four checks with independent streams derived from `seed`.
inline VerifyReport cmd_verify(std::uint64_t seed, std::size_t trials,
                               const EntropyFn& entropy = metric_entropy) {
  if (trials < 1) throw UsageError("verify needs at least one trial");
  VerifyReport report{seed, trials, {}};
  Rng a(derive_seed(seed, 1)), b(derive_seed(seed, 2)), c(derive_seed(seed, 3)),
      d(derive_seed(seed, 4));
  report.checks.push_back(check_entropy_order(a, trials, entropy));
  report.checks.push_back(check_ce_bounds(b, trials));
  report.checks.push_back(check_metric_identities(c, trials));
  report.checks.push_back(check_approx_rank_limit(d, trials));
  return report;
}

inline void write_verify(const VerifyReport& report, std::ostream& out) {
  out << "verify seed=" << report.seed << " trials=" << report.trials << '\n';
  for (const CheckResult& c : report.checks) {
    char margin[64];
    std::snprintf(margin, sizeof(margin), "%.6e", c.min_margin);
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " cases=" << c.cases
        << " min_margin=" << margin << '\n';
    if (!c.passed) out << "  counterexample: " << c.counterexample << '\n';
  }
  out << (report.passed() ? "PASS" : "FAIL") << '\n';
}

}  // namespace rank4class
