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
#include <vector>

#include "flowfid/error.hpp"
#include "flowfid/gradcheck.hpp"
#include "flowfid/ops.hpp"
#include "flowfid/random.hpp"
#include "oracles.hpp"
#include "gtest/gtest.h"

namespace flowfid {
namespace {

double MaxAbsDiff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::fabs(a.at(i) - b.at(i)));
  }
  return m;
}

TEST(Conv2d, IdentityPointwiseKernel) {
  Rng rng(1);
  Tensor x = rng.NormalTensor({2, 3, 4, 5});
  std::vector<double> k(9, 0.0);
  for (int c = 0; c < 3; ++c) k[c * 3 + c] = 1.0;
  Tensor y = Conv2d(x, Tensor({3, 3, 1, 1}, k), Tensor({3}, 0.0));
  EXPECT_EQ(MaxAbsDiff(x, y), 0.0);
}

TEST(Conv2d, ZeroKernelGivesBias) {
  Rng rng(2);
  Tensor x = rng.NormalTensor({1, 2, 5, 5});
  Tensor y = Conv2d(x, Tensor({4, 2, 3, 3}, 0.0), Tensor({4}, 0.75), 1, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 4, 5, 5}));
  for (double v : y.values()) EXPECT_EQ(v, 0.75);
}

TEST(Conv2d, MatchesNaiveLoopOracle) {
  Rng rng(3);
  Tensor x = rng.NormalTensor({1, 2, 5, 5});
  Tensor k = rng.NormalTensor({4, 2, 3, 3});
  Tensor b = rng.NormalTensor({4});
  EXPECT_LT(MaxAbsDiff(Conv2d(x, k, b, 1, 1), oracle::NaiveConv2d(x, k, b, 1, 1)),
            1e-12);
}

TEST(Conv2d, PropertyRandomGeometries) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed, 5);
    const auto n = 1 + rng.UniformInt(2);
    const auto ci = 1 + rng.UniformInt(4);
    const auto co = 1 + rng.UniformInt(4);
    const auto h = 3 + rng.UniformInt(6);
    const auto w = 3 + rng.UniformInt(6);
    const int kh = static_cast<int>(1 + 2 * rng.UniformInt(2));
    const int stride = static_cast<int>(1 + rng.UniformInt(2));
    const int pad = static_cast<int>(rng.UniformInt(2));
    auto in = [](std::uint64_t v) { return static_cast<std::int64_t>(v); };
    Tensor x = rng.NormalTensor({in(n), in(ci), in(h), in(w)});
    Tensor k = rng.NormalTensor({in(co), in(ci), kh, kh});
    Tensor b = rng.NormalTensor({in(co)});
    EXPECT_LT(MaxAbsDiff(Conv2d(x, k, b, stride, pad),
                         oracle::NaiveConv2d(x, k, b, stride, pad)),
              1e-12)
        << "seed " << seed;
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  Tensor x0 = rng.NormalTensor({2, 2, 4, 4});
  Tensor k0 = rng.NormalTensor({3, 2, 3, 3});
  Tensor b0 = rng.NormalTensor({3});
  Tensor probe = rng.NormalTensor({2, 3, 2, 2});
  auto f = [&](const Tensor& x, const Tensor& k, const Tensor& b) {
    return Sum(Conv2d(x, k, b, 2, 1) * probe);
  };
  auto leaf = [](const Tensor& t) {
    return Tensor::Parameter(t.shape(), {t.values().begin(), t.values().end()});
  };
  Tensor x = leaf(x0), k = leaf(k0), b = leaf(b0);
  f(x, k, b).backward();
  auto gx = FiniteDifferenceGradient([&](const Tensor& t) { return f(t, k0, b0).item(); }, x0);
  auto gk = FiniteDifferenceGradient([&](const Tensor& t) { return f(x0, t, b0).item(); }, k0);
  auto gb = FiniteDifferenceGradient([&](const Tensor& t) { return f(x0, k0, t).item(); }, b0);
  EXPECT_LT(MaxRelativeError(x.grad(), gx.values()), 1e-7);
  EXPECT_LT(MaxRelativeError(k.grad(), gk.values()), 1e-7);
  EXPECT_LT(MaxRelativeError(b.grad(), gb.values()), 1e-7);
}

TEST(Conv2d, ChannelMismatchThrows) {
  EXPECT_THROW(Conv2d(Tensor({1, 2, 4, 4}), Tensor({3, 3, 3, 3}), Tensor()),
               ShapeError);
}

}  // namespace
}  // namespace flowfid
