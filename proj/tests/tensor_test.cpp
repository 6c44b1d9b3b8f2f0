// Copyright 2026 The flowfid Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "flowfid/error.hpp"
#include "flowfid/gradcheck.hpp"
#include "flowfid/ops.hpp"
#include "flowfid/random.hpp"
#include "flowfid/tensor.hpp"
#include "gtest/gtest.h"

namespace flowfid {
namespace {

TEST(TensorOps, SigmoidAtZero) {
  EXPECT_EQ(Sigmoid(Tensor::Scalar(0.0)).item(), 0.5);
}

TEST(TensorOps, AbsAndSubgradientAtZero) {
  Tensor x = Tensor::Parameter({3}, {-3.0, 0.0, 2.0});
  Tensor y = Abs(x);
  EXPECT_EQ(y.at(0), 3.0);
  Sum(y).backward();
  EXPECT_EQ(x.grad()[0], -1.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(TensorOps, ExpLogRoundTrip) {
  for (double v : {0.5, 1.0, 2.0}) {
    EXPECT_NEAR(Exp(Log(Tensor::Scalar(v))).item(), v, 1e-12);
  }
}

TEST(TensorOps, DomainErrorsAreRaised) {
  EXPECT_THROW(Log(Tensor::Scalar(0.0)), DomainError);
  EXPECT_THROW(Log(Tensor::Scalar(-1.0)), DomainError);
  EXPECT_THROW(Tensor::Scalar(1.0) / Tensor::Scalar(0.0), DomainError);
  EXPECT_THROW(Exp(Tensor::Scalar(1000.0)), NumericError);
}

TEST(TensorOps, Reductions) {
  EXPECT_EQ(Sum(Tensor({2, 3}, 1.0)).item(), 6.0);
  EXPECT_EQ(Mean(Tensor({3}, {1.0, 2.0, 3.0})).item(), 2.0);
  Tensor x = Tensor::Parameter({2, 3}, {1, 2, 3, 4, 5, 6});
  Sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);

  Tensor r = Sum(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), {1});
  ASSERT_EQ(r.shape(), (Shape{2}));
  EXPECT_EQ(r.at(0), 6.0);
  EXPECT_EQ(r.at(1), 15.0);
  EXPECT_THROW(Sum(x, {2}), ShapeError);
}

TEST(Autodiff, SquareGradient) {
  Tensor x = Tensor::Parameter({}, {3.0});
  Square(x).backward();
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Autodiff, RepeatedBackwardAccumulates) {
  Rng rng(3);
  Tensor x = Tensor::Parameter({4}, {0.3, -1.2, 2.0, 0.7});
  Tensor loss = Sum(Sigmoid(x) * x);
  loss.backward();
  std::vector<double> once(x.grad().begin(), x.grad().end());
  loss.backward();
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * once[i]);
  }
  x.zero_grad();
  loss.backward();
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(x.grad()[i], once[i]);
}

TEST(Autodiff, NonScalarBackwardRejected) {
  Tensor x = Tensor::Parameter({2}, {1.0, 2.0});
  EXPECT_THROW((x * 2.0).backward(), ShapeError);
}

TEST(Autodiff, SigmoidMatVecAgainstFiniteDifferences) {
  Rng rng(11);
  Tensor w = rng.NormalTensor({4, 4});
  Tensor x = rng.NormalTensor({1, 4});
  auto loss = [&](const Tensor& wt) {
    return Sum(Sigmoid(Linear(x, wt, Tensor())));
  };
  Tensor wp = Tensor::Parameter(w.shape(), {w.values().begin(), w.values().end()});
  loss(wp).backward();
  Tensor numeric = FiniteDifferenceGradient(
      [&](const Tensor& t) { return loss(t).item(); }, w, 1e-5);
  EXPECT_LT(MaxRelativeError(wp.grad(), numeric.values()), 1e-6);
}

TEST(Autodiff, SharedSubexpressionMatchesDuplicatedTree) {
  Tensor x1 = Tensor::Parameter({3}, {0.2, -0.4, 1.1});
  Tensor x2 = Tensor::Parameter({3}, {0.2, -0.4, 1.1});
  Tensor shared = Exp(x1) * x1;
  Sum(shared * shared + Sigmoid(shared)).backward();
  Sum((Exp(x2) * x2) * (Exp(x2) * x2) + Sigmoid(Exp(x2) * x2)).backward();
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(x1.grad()[i], x2.grad()[i]);
}

TEST(FiniteDifference, SumIsAllOnes) {
  Tensor at({2, 2}, {1.0, -2.0, 3.0, 0.5});
  Tensor g = FiniteDifferenceGradient(
      [](const Tensor& t) { return Sum(t).item(); }, at);
  for (double v : g.values()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDifference, Cube) {
  Tensor g = FiniteDifferenceGradient(
      [](const Tensor& t) {
        const double x = t.at(0);
        return x * x * x;
      },
      Tensor({1}, {2.0}), 1e-5);
  EXPECT_NEAR(g.at(0), 12.0, 1e-6);
}

// Property: every differentiable op agrees with central differences.
struct OpCase {
  std::string name;
  std::function<Tensor(const Tensor&)> f;
  // Keeps samples away from kinks and domain edges.
  std::function<double(double)> shape_input = [](double v) { return v; };
};

std::vector<OpCase> UnaryCases() {
  auto away_from_zero = [](double v) { return v + (v >= 0 ? 0.3 : -0.3); };
  return {
      {"neg", [](const Tensor& x) { return Neg(x); }},
      {"exp", [](const Tensor& x) { return Exp(x); }},
      {"log", [](const Tensor& x) { return Log(x); },
       [](double v) { return 0.5 + std::fabs(v); }},
      {"sigmoid", [](const Tensor& x) { return Sigmoid(x); }},
      {"abs", [](const Tensor& x) { return Abs(x); }, away_from_zero},
      {"square", [](const Tensor& x) { return Square(x); }},
      {"softplus", [](const Tensor& x) { return Softplus(x); }},
      {"silu", [](const Tensor& x) { return Silu(x); }},
      {"clamp", [](const Tensor& x) { return Clamp(x, -0.5, 0.5); },
       [](double v) { return std::fabs(std::fabs(v) - 0.5) < 0.05 ? v + 0.2 : v; }},
      {"mul_self", [](const Tensor& x) { return x * x + x; }},
      {"div", [](const Tensor& x) { return 1.0 / (1.0 + Square(x)); }},
      {"sum_axes", [](const Tensor& x) { return Sum(x, {1, 3}, true) * x; }},
      {"mean_axes", [](const Tensor& x) { return Mean(x, {0, 2}); }},
      {"reshape", [](const Tensor& x) { return Square(Reshape(x, {4, 8})); }},
      {"slice_concat",
       [](const Tensor& x) {
         return ConcatChannels({SliceChannels(x, 1, 2), Square(SliceChannels(x, 0, 1))});
       }},
      {"space_to_depth", [](const Tensor& x) { return Square(SpaceToDepth(x, 2)); }},
      {"depth_to_space",
       [](const Tensor& x) { return Square(DepthToSpace(Reshape(x, {2, 16, 1, 1}), 2)); }},
      {"upsample", [](const Tensor& x) { return Square(UpsampleNearest(x, 2)); }},
      {"avgpool", [](const Tensor& x) { return Square(AvgPool(x, 2)); }},
      {"resize_nearest", [](const Tensor& x) { return Square(ResizeNearest(x, 3, 5)); }},
      {"batch_slice_concat",
       [](const Tensor& x) {
         return ConcatBatch({Exp(SliceBatch(x, 1, 2)), SliceBatch(x, 0, 1)});
       }},
  };
}

TEST(AutodiffProperty, EveryOpMatchesFiniteDifferencesOver50Seeds) {
  for (const OpCase& op : UnaryCases()) {
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      Rng rng(seed, 77);
      Tensor base = rng.NormalTensor({2, 2, 2, 4});
      std::vector<double> v(base.values().begin(), base.values().end());
      for (double& e : v) e = op.shape_input(e);
      Tensor point({2, 2, 2, 4}, v);
      Tensor probe;
      auto loss = [&](const Tensor& x) {
        Tensor y = op.f(x);
        if (!probe.defined()) probe = rng.NormalTensor(y.shape());
        return Sum(y * probe);
      };
      Tensor leaf = Tensor::Parameter(point.shape(), v);
      loss(leaf).backward();
      Tensor numeric = FiniteDifferenceGradient(
          [&](const Tensor& x) { return loss(x).item(); }, point, 1e-5);
      worst = std::max(worst, MaxRelativeError(leaf.grad(), numeric.values()));
    }
    EXPECT_LT(worst, 1e-5) << op.name;
  }
}

TEST(AutodiffProperty, BinaryBroadcastOps) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed, 78);
    Tensor a0 = rng.NormalTensor({2, 3, 2, 2});
    Tensor b0 = rng.UniformTensor({1, 3, 1, 1}, 0.5, 2.0);
    auto f = [](const Tensor& a, const Tensor& b) {
      return Sum((a + b) * (a - b) / b);
    };
    Tensor a = Tensor::Parameter(a0.shape(), {a0.values().begin(), a0.values().end()});
    Tensor b = Tensor::Parameter(b0.shape(), {b0.values().begin(), b0.values().end()});
    f(a, b).backward();
    Tensor na = FiniteDifferenceGradient(
        [&](const Tensor& x) { return f(x, b0).item(); }, a0);
    Tensor nb = FiniteDifferenceGradient(
        [&](const Tensor& x) { return f(a0, x).item(); }, b0);
    EXPECT_LT(MaxRelativeError(a.grad(), na.values()), 1e-5) << seed;
    EXPECT_LT(MaxRelativeError(b.grad(), nb.values()), 1e-5) << seed;
  }
}

TEST(NoGrad, GuardSkipsTape) {
  Tensor x = Tensor::Parameter({2}, {1.0, 2.0});
  {
    NoGradGuard guard;
    Tensor y = x * 3.0;
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE((x * 3.0).requires_grad());
}

TEST(Random, StreamsAreIndependentAndSerializable) {
  Rng a(5, 1), b(5, 2);
  EXPECT_NE(a.NextU64(), b.NextU64());
  Rng c(9);
  c.Normal();
  Rng d = Rng::Deserialize(c.Serialize());
  EXPECT_EQ(c.Normal(), d.Normal());
  for (int i = 0; i < 1000; ++i) {
    const double u = c.Uniform01();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Random, LaplaceMoments) {
  Rng rng(21);
  double sum = 0, abs_sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Laplace();
    sum += x;
    abs_sum += std::fabs(x);
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(abs_sum / n, 1.0, 0.01);
}

}  // namespace
}  // namespace flowfid
