// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rank4class/error.hpp"
#include "rank4class/tensor.hpp"

namespace rank4class {

enum class OptimizerKind { kAdam, kAdagrad };

inline std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "adagrad";
}

inline OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "adagrad") return OptimizerKind::kAdagrad;
  throw UsageError("unknown optimizer '" + std::string(name) + "' (valid: adam, adagrad)");
}

/// Per-parameter buffers for Adam (first and second moments) or Adagrad
/// (squared-gradient accumulator; stored in `second`).
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<Tensor> first;
  std::vector<Tensor> second;

  static OptimizerState adam(double lr, std::span<Tensor* const> params) {
    OptimizerState s;
    s.kind = OptimizerKind::kAdam;
    s.lr = lr;
    s.epsilon = 1e-8;
    for (const Tensor* p : params) {
      s.first.emplace_back(p->shape(), 0.0);
      s.second.emplace_back(p->shape(), 0.0);
    }
    return s;
  }

  static OptimizerState adagrad(double lr, std::span<Tensor* const> params) {
    OptimizerState s;
    s.kind = OptimizerKind::kAdagrad;
    s.lr = lr;
    s.epsilon = 1e-7;
    for (const Tensor* p : params) s.second.emplace_back(p->shape(), 0.0);
    return s;
  }

  static OptimizerState make(OptimizerKind kind, double lr, std::span<Tensor* const> params) {
    return kind == OptimizerKind::kAdam ? adam(lr, params) : adagrad(lr, params);
  }
};

namespace detail {

inline void check_step_shapes(const OptimizerState& state, std::span<Tensor* const> params,
                              std::span<const Tensor> grads) {
  if (params.size() != grads.size() || params.size() != state.second.size()) {
    throw ShapeError("optimizer: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i].shape() ||
        params[i]->shape() != state.second[i].shape()) {
      throw ShapeError("optimizer: shape mismatch at parameter " + std::to_string(i));
    }
  }
}

}  // namespace detail

/// Bias-corrected Adam: p -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(OptimizerState& state, std::span<Tensor* const> params,
                      std::span<const Tensor> grads) {
  if (state.kind != OptimizerKind::kAdam) throw UsageError("adam_step on non-Adam state");
  detail::check_step_shapes(state, params, grads);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p];
    Tensor& m = state.first[p];
    Tensor& v = state.second[p];
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      param[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

/// acc += g^2; p -= lr * g / sqrt(acc + eps).
inline void adagrad_step(OptimizerState& state, std::span<Tensor* const> params,
                         std::span<const Tensor> grads) {
  if (state.kind != OptimizerKind::kAdagrad) {
    throw UsageError("adagrad_step on non-Adagrad state");
  }
  detail::check_step_shapes(state, params, grads);
  ++state.step;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p];
    Tensor& acc = state.second[p];
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < param.size(); ++i) {
      acc[i] += g[i] * g[i];
      param[i] -= state.lr * g[i] / std::sqrt(acc[i] + state.epsilon);
    }
  }
}

inline void optimizer_step(OptimizerState& state, std::span<Tensor* const> params,
                           std::span<const Tensor> grads) {
  if (state.kind == OptimizerKind::kAdam) {
    adam_step(state, params, grads);
  } else {
    adagrad_step(state, params, grads);
  }
}

/// 1e-7 * 3^k for every k with the value at most 0.1: 13 learning rates.
inline std::vector<double> lr_grid() {
  std::vector<double> grid;
  for (double lr = 1e-7; lr <= 0.1; lr *= 3.0) grid.push_back(lr);
  return grid;
}

}  // namespace rank4class
