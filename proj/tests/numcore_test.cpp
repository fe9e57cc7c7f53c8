// Copyright 2026 The rank4class Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "rank4class/grad_check.hpp"
#include "rank4class/ops.hpp"
#include "rank4class/tape.hpp"
#include "test_util.hpp"

namespace rank4class {
namespace {

using testing::gradient_error;
using testing::random_tensor;

TEST(Affine, IdentityWeightsZeroBias) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({3, 4}));
  Var w = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Var b = tape.constant(Tensor::vector({0, 0}));
  EXPECT_EQ(affine(x, w, b).value().values(), (std::vector<double>{3, 4}));
}

TEST(Affine, SumPlusBias) {
  Tape tape;
  Var out = affine(tape.constant(Tensor::vector({2, 3})), tape.constant(Tensor::matrix({{1, 1}})),
                   tape.constant(Tensor::vector({1})));
  EXPECT_EQ(out.value().values(), (std::vector<double>{6}));
}

TEST(Affine, ZeroWeightsGiveBias) {
  Tape tape;
  Var out = affine(tape.constant(Tensor::vector({5, -7, 2})),
                   tape.constant(Tensor(Shape{2, 3}, 0.0)),
                   tape.constant(Tensor::vector({0.25, -1.5})));
  EXPECT_EQ(out.value().values(), (std::vector<double>{0.25, -1.5}));
}

TEST(Affine, DimensionMismatchThrows) {
  Tape tape;
  Var x = tape.constant(Tensor::vector({1, 2, 3}));
  Var w = tape.constant(Tensor(Shape{2, 2}));
  Var b = tape.constant(Tensor::vector({0, 0}));
  EXPECT_THROW(affine(x, w, b), ShapeError);
  Var w_ok = tape.constant(Tensor(Shape{2, 3}));
  Var b_bad = tape.constant(Tensor::vector({0, 0, 0}));
  EXPECT_THROW(affine(x, w_ok, b_bad), ShapeError);
}

TEST(Softmax, Examples) {
  Tape tape;
  const auto half = softmax(tape.constant(Tensor::vector({0, 0}))).value();
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);

  const auto p = softmax(tape.constant(Tensor::vector({std::log(2.0), 0.0}))).value();
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(Softmax, ShiftInvarianceAndSimplex) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    auto s = testing::random_scores(rng, n, 5.0);
    const double c = rng.uniform(-50, 50);
    std::vector<double> shifted(s);
    for (double& v : shifted) v += c;
    Tape tape;
    const auto p = softmax(tape.constant(Tensor::vector(s))).value();
    const auto q = softmax(tape.constant(Tensor::vector(shifted))).value();
    const double total = std::accumulate(p.data().begin(), p.data().end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(p[i], q[i], 1e-12);
      EXPECT_GT(p[i], 0.0);
      if (n > 1) {
        EXPECT_LT(p[i], 1.0);
      }
    }
  }
}

TEST(Softmax, LargeScoresStayFinite) {
  Tape tape;
  const auto p = softmax(tape.constant(Tensor::vector({1000, 999, -1000}))).value();
  EXPECT_TRUE(p.all_finite());
  EXPECT_NEAR(p[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Backward, SquareAtThree) {
  Tape tape;
  Var x = tape.parameter(Tensor::scalar(3.0));
  tape.backward(mul(x, x));
  EXPECT_DOUBLE_EQ(tape.grad(x).item(), 6.0);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  Tape tape;
  Var s = tape.parameter(Tensor::vector({0.3, -1.2, 2.5, 0.0}));
  tape.backward(sum(softmax(s)));
  for (double g : tape.grad(s).data()) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Backward, SharedNodeAccumulates) {
  Tape single;
  Var a = single.parameter(Tensor::vector({0.5, -0.25, 1.5}));
  single.backward(sum(tanh(a)));

  Tape twice;
  Var b = twice.parameter(Tensor::vector({0.5, -0.25, 1.5}));
  Var shared = tanh(b);
  twice.backward(add(sum(shared), sum(shared)));

  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(twice.grad(b)[i], 2.0 * single.grad(a)[i]);
  }
}

TEST(Backward, NonScalarOutputIsUsageError) {
  Tape tape;
  Var x = tape.parameter(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(scale(x, 2.0)), UsageError);
}

TEST(Backward, ConstantsHaveNoGradient) {
  Tape tape;
  Var c = tape.constant(Tensor::vector({1, 2}));
  Var p = tape.parameter(Tensor::vector({3, 4}));
  tape.backward(sum(mul(c, p)));
  EXPECT_THROW(tape.grad(c), UsageError);
  EXPECT_EQ(tape.grad(p).values(), (std::vector<double>{1, 2}));
}

TEST(Tape, RejectsNonFinite) {
  Tape tape;
  EXPECT_THROW(tape.constant(Tensor::vector({1.0, NAN})), std::domain_error);
  Var x = tape.parameter(Tensor::vector({-1.0}));
  EXPECT_THROW(log(x), std::domain_error);
}

TEST(FiniteDiff, Examples) {
  const auto sq = [](std::span<const double> x) { return x[0] * x[0]; };
  const std::vector<double> at3{3.0};
  EXPECT_NEAR(finite_diff_grad(sq, at3, 1e-6)[0], 6.0, 1e-6);

  const auto linear_fn = [](std::span<const double> x) { return 2.5 * x[0] - 4.0 * x[1]; };
  const std::vector<double> at{0.7, -3.0};
  const auto g = finite_diff_grad(linear_fn, at, 1e-6);
  EXPECT_NEAR(g[0], 2.5, 1e-9);
  EXPECT_NEAR(g[1], -4.0, 1e-9);

  EXPECT_THROW(finite_diff_grad(sq, at3, 0.0), UsageError);
}

// Every differentiable primitive against central differences over 100 seeds.
struct OpCase {
  const char* name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  testing::GraphBuilder build;
};

// Random readout weights make vector-valued ops into scalars with every
// output coordinate in play.
Var readout(Tape& tape, Var v, std::uint64_t salt) {
  Rng rng(salt);
  Tensor w(v.shape());
  for (double& x : w.data()) x = rng.uniform(-1.0, 1.0);
  return sum(mul(v, tape.constant(std::move(w))));
}

std::vector<OpCase> op_cases() {
  return {
      {"affine",
       [](Rng& r) {
         return std::vector{random_tensor(r, {4}), random_tensor(r, {3, 4}),
                            random_tensor(r, {3})};
       },
       [](Tape& t, std::span<const Var> v) { return readout(t, affine(v[0], v[1], v[2]), 1); }},
      {"linear_batch",
       [](Rng& r) {
         return std::vector{random_tensor(r, {5, 4}), random_tensor(r, {3, 4}),
                            random_tensor(r, {3})};
       },
       [](Tape& t, std::span<const Var> v) { return readout(t, linear(v[0], v[1], v[2]), 2); }},
      {"matmul_nt",
       [](Rng& r) { return std::vector{random_tensor(r, {2, 6}), random_tensor(r, {4, 6})}; },
       [](Tape& t, std::span<const Var> v) { return readout(t, matmul_nt(v[0], v[1]), 3); }},
      {"add_sub_mul",
       [](Rng& r) { return std::vector{random_tensor(r, {6}), random_tensor(r, {6})}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, mul(add(v[0], v[1]), sub(v[0], v[1])), 4);
       }},
      {"scale_shift",
       [](Rng& r) { return std::vector{random_tensor(r, {5})}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, add_scalar(scale(v[0], -2.5), 0.75), 5);
       }},
      {"relu",
       [](Rng& r) {
         // Keep inputs away from the kink.
         Tensor x = random_tensor(r, {8}, 0.1, 1.0);
         for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
         return std::vector{x};
       },
       [](Tape& t, std::span<const Var> v) { return readout(t, relu(v[0]), 6); }},
      {"tanh_sigmoid",
       [](Rng& r) { return std::vector{random_tensor(r, {7}, -3, 3)}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, add(tanh(v[0]), sigmoid(v[0])), 7);
       }},
      {"exp_log",
       [](Rng& r) { return std::vector{random_tensor(r, {5}, 0.2, 3.0)}; },
       [](Tape& t, std::span<const Var> v) { return readout(t, add(exp(v[0]), log(v[0])), 8); }},
      {"softplus",
       [](Rng& r) { return std::vector{random_tensor(r, {9}, -20, 20)}; },
       [](Tape& t, std::span<const Var> v) { return readout(t, softplus(v[0]), 9); }},
      {"square_reciprocal",
       [](Rng& r) { return std::vector{random_tensor(r, {5}, 0.5, 2.0)}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, add(square(v[0]), reciprocal(v[0])), 10);
       }},
      {"sum_mean",
       [](Rng& r) { return std::vector{random_tensor(r, {3, 3})}; },
       [](Tape&, std::span<const Var> v) {
         return add(mean(square(v[0])), sum(v[0]));
       }},
      {"log_sum_exp",
       [](Rng& r) { return std::vector{random_tensor(r, {6}, -4, 4)}; },
       [](Tape&, std::span<const Var> v) { return log_sum_exp(v[0]); }},
      {"softmax",
       [](Rng& r) { return std::vector{random_tensor(r, {6}, -4, 4)}; },
       [](Tape& t, std::span<const Var> v) { return readout(t, softmax(v[0]), 11); }},
      {"pick_row_broadcast",
       [](Rng& r) { return std::vector{random_tensor(r, {3, 4})}; },
       [](Tape& t, std::span<const Var> v) {
         Var r1 = row(v[0], 1);
         return readout(t, mul(r1, broadcast(pick(r1, 2), 4)), 12);
       }},
      {"stack_concat",
       [](Rng& r) { return std::vector{random_tensor(r, {3}), random_tensor(r, {2})}; },
       [](Tape& t, std::span<const Var> v) {
         std::vector<Var> parts{pick(v[0], 0), pick(v[1], 1), pick(v[0], 2)};
         return readout(t, mul(concat(v[0], v[1]), concat(stack(parts), v[1])), 13);
       }},
      {"append_ones",
       [](Rng& r) { return std::vector{random_tensor(r, {3, 2})}; },
       [](Tape& t, std::span<const Var> v) { return readout(t, square(append_ones(v[0])), 14); }},
      {"pair_product",
       [](Rng& r) { return std::vector{random_tensor(r, {3, 4}), random_tensor(r, {5, 4})}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, square(pair_product(v[0], v[1])), 15);
       }},
      {"pair_concat",
       [](Rng& r) { return std::vector{random_tensor(r, {2, 3}), random_tensor(r, {4, 3})}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, square(pair_concat(v[0], v[1])), 16);
       }},
      {"outer_diff_row_sums",
       [](Rng& r) { return std::vector{random_tensor(r, {5}, -2, 2)}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, row_sums(sigmoid(scale(outer_diff(v[0]), 3.0))), 17);
       }},
      {"reshape",
       [](Rng& r) { return std::vector{random_tensor(r, {6})}; },
       [](Tape& t, std::span<const Var> v) {
         return readout(t, row_sums(square(reshape(v[0], {2, 3}))), 18);
       }},
  };
}

TEST(GradientFidelity, EveryPrimitiveOverHundredSeeds) {
  for (const OpCase& op : op_cases()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(derive_seed(seed, 42));
      worst = std::max(worst, gradient_error(op.build, op.inputs(rng)));
    }
    EXPECT_LT(worst, 1e-5) << op.name;
  }
}

TEST(GradientFidelity, CompositeGraph) {
  // A two-layer network with a log-sum-exp head: exercises fan-out through
  // the hidden activations and accumulation across batch rows.
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> inputs{random_tensor(rng, {4, 3}), random_tensor(rng, {5, 3}),
                               random_tensor(rng, {5}), random_tensor(rng, {2, 5})};
    const double err = gradient_error(
        [](Tape&, std::span<const Var> v) {
          Var hidden = tanh(linear(v[0], v[1], v[2]));
          Var scores = matmul_nt(hidden, v[3]);
          Var total = log_sum_exp(reshape(scores, {8}));
          return add(total, mean(square(hidden)));
        },
        inputs);
    EXPECT_LT(err, 1e-5);
  }
}

}  // namespace
}  // namespace rank4class
