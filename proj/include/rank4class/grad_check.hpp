// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "rank4class/error.hpp"

namespace rank4class {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h, one coordinate at a time.
inline std::vector<double> finite_diff_grad(const ScalarFunction& f,
                                            std::span<const double> x, double h = 1e-6) {
  if (!(h > 0.0)) throw UsageError("finite_diff_grad: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double forward = f(probe);
    probe[i] = original - h;
    const double backward = f(probe);
    probe[i] = original;
    grad[i] = (forward - backward) / (2.0 * h);
  }
  return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
///
/// The floor keeps entries that are zero up to rounding (saturated sigmoids,
/// vanishing softmax mass) from turning finite-difference noise into a
/// spurious relative blow-up.
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-2) {
  if (a.size() != b.size()) throw UsageError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace rank4class
