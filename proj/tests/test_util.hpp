// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rank4class/grad_check.hpp"
#include "rank4class/random.hpp"
#include "rank4class/tape.hpp"
#include "rank4class/tensor.hpp"

namespace rank4class::testing {

/// Builds a scalar from leaves that were recorded as parameters, in order.
using GraphBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// Largest max_relative_error between reverse-mode gradients and central
/// differences, over every entry of every input.
inline double gradient_error(const GraphBuilder& build, const std::vector<Tensor>& inputs,
                             double h = 1e-6) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.parameter(t));
  Var out = build(tape, leaves);
  tape.backward(out);

  double worst = 0.0;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    const auto analytic = tape.grad(leaves[which]).data();
    auto f = [&](std::span<const double> x) {
      Tape probe;
      std::vector<Var> probe_leaves;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        probe_leaves.push_back(k == which ? probe.constant(Tensor(inputs[k].shape(),
                                                                  {x.begin(), x.end()}))
                                          : probe.constant(inputs[k]));
      }
      return build(probe, probe_leaves).value().item();
    };
    const auto numeric = finite_diff_grad(f, inputs[which].data(), h);
    worst = std::max(worst, max_relative_error(analytic, numeric));
  }
  return worst;
}

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline std::vector<double> random_scores(Rng& rng, std::size_t n, double spread = 2.0) {
  std::vector<double> s(n);
  for (double& v : s) v = spread * rng.normal();
  return s;
}

}  // namespace rank4class::testing
