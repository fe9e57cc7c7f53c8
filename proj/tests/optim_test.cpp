// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "rank4class/optim.hpp"
#include "rank4class/random.hpp"

namespace rank4class {
namespace {

struct Single {
  Tensor param;
  std::vector<Tensor*> params;
  explicit Single(std::vector<double> values) : param(Tensor::vector(std::move(values))) {
    params.push_back(&param);
  }
  void step(OptimizerState& state, std::vector<double> grad) {
    const std::vector<Tensor> grads{Tensor::vector(std::move(grad))};
    optimizer_step(state, params, grads);
  }
};

TEST(Adam, FirstStepMovesByLearningRate) {
  Single s({1.0});
  auto state = OptimizerState::adam(0.1, s.params);
  s.step(state, {0.5});
  EXPECT_NEAR(s.param[0], 0.9, 1e-7);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  Single s({1.0, -2.0, 3.5});
  auto state = OptimizerState::adam(0.1, s.params);
  for (int t = 0; t < 5; ++t) s.step(state, {0.0, 0.0, 0.0});
  EXPECT_EQ(s.param.values(), (std::vector<double>{1.0, -2.0, 3.5}));
}

TEST(Adam, StepOpposesGradientSign) {
  Single s({0.0, 0.0});
  auto state = OptimizerState::adam(0.01, s.params);
  s.step(state, {-3.0, 2.0});
  EXPECT_GT(s.param[0], 0.0);
  EXPECT_LT(s.param[1], 0.0);
}

TEST(Adagrad, FirstStepExample) {
  Single s({1.0});
  auto state = OptimizerState::adagrad(0.1, s.params);
  s.step(state, {2.0});
  EXPECT_NEAR(s.param[0], 1.0 - 0.1 * 2.0 / std::sqrt(4.0 + 1e-7), 1e-15);
  EXPECT_NEAR(s.param[0], 0.9, 1e-7);
  const double first = s.param[0];
  s.step(state, {2.0});
  EXPECT_NEAR(s.param[0], first - 0.1 * 2.0 / std::sqrt(8.0 + 1e-7), 1e-12);
}

TEST(Adagrad, ZeroGradientLeavesParametersAlone) {
  Single s({4.0});
  auto state = OptimizerState::adagrad(0.5, s.params);
  s.step(state, {0.0});
  EXPECT_EQ(s.param[0], 4.0);
}

TEST(Optimizers, SmallStepsDecreaseHalfSquare) {
  for (OptimizerKind kind : {OptimizerKind::kAdam, OptimizerKind::kAdagrad}) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      Single s({rng.uniform(-3, 3), rng.uniform(-3, 3)});
      if (std::abs(s.param[0]) < 0.05 || std::abs(s.param[1]) < 0.05) continue;
      auto state = OptimizerState::make(kind, 1e-3, s.params);
      const double before = 0.5 * (s.param[0] * s.param[0] + s.param[1] * s.param[1]);
      s.step(state, {s.param[0], s.param[1]});
      const double after = 0.5 * (s.param[0] * s.param[0] + s.param[1] * s.param[1]);
      EXPECT_LT(after, before) << optimizer_name(kind);
    }
  }
}

TEST(Optimizers, Deterministic) {
  for (OptimizerKind kind : {OptimizerKind::kAdam, OptimizerKind::kAdagrad}) {
    Single a({0.3, -0.7}), b({0.3, -0.7});
    auto sa = OptimizerState::make(kind, 0.05, a.params);
    auto sb = OptimizerState::make(kind, 0.05, b.params);
    for (int t = 0; t < 20; ++t) {
      const std::vector<double> g{std::sin(t * 1.0), std::cos(t * 0.5)};
      a.step(sa, g);
      b.step(sb, g);
    }
    EXPECT_EQ(a.param, b.param);
  }
}

TEST(Optimizers, ShapeAndKindErrors) {
  Single s({1.0, 2.0});
  auto adam = OptimizerState::adam(0.1, s.params);
  const std::vector<Tensor> wrong{Tensor::vector({1.0})};
  EXPECT_THROW(optimizer_step(adam, s.params, wrong), ShapeError);
  const std::vector<Tensor> none;
  EXPECT_THROW(optimizer_step(adam, s.params, none), ShapeError);
  const std::vector<Tensor> ok{Tensor::vector({1.0, 1.0})};
  EXPECT_THROW(adagrad_step(adam, s.params, ok), UsageError);
  EXPECT_THROW(parse_optimizer("sgd"), UsageError);
  EXPECT_EQ(parse_optimizer("adagrad"), OptimizerKind::kAdagrad);
}

TEST(LrGrid, ThirteenValuesByThrees) {
  const auto grid = lr_grid();
  ASSERT_EQ(grid.size(), 13u);
  EXPECT_EQ(grid.front(), 1e-7);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(grid[i] / grid[i - 1], 3.0, 1e-12);
  EXPECT_LE(grid.back(), 0.1);
  EXPECT_GT(grid.back() * 3.0, 0.1);
}

}  // namespace
}  // namespace rank4class
