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
#include <numbers>
#include <vector>

#include "flowfid/adam.hpp"
#include "flowfid/config.hpp"
#include "flowfid/dataset.hpp"
#include "flowfid/error.hpp"
#include "flowfid/flow_network.hpp"
#include "flowfid/gradcheck.hpp"
#include "flowfid/models.hpp"
#include "flowfid/ops.hpp"
#include "flowfid/random.hpp"
#include "flowfid/verify.hpp"
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

FlowConfig Small(int levels, int steps, int channels = 3, int cond = 4) {
  FlowConfig c;
  c.levels = levels;
  c.steps = steps;
  c.image_channels = channels;
  c.cond_channels = cond;
  c.hidden_channels = 6;
  return c;
}

struct Fixture {
  FlowNetwork flow;
  LrEmbedding e;
  Tensor y;
};

Fixture Build(const FlowConfig& config, Shape y_shape, std::uint64_t seed,
              double param_scale = 0.1) {
  Rng rng(seed, 40);
  FlowNetwork flow(config, rng);
  StateList state;
  flow.Collect("flow", state);
  RandomizeParameters(state, rng, param_scale);
  Tensor y = rng.UniformTensor(y_shape, 0.0, 1.0);
  LrEmbedding e = RandomEmbedding(flow, y_shape, config.cond_channels, rng);
  return {std::move(flow), std::move(e), y};
}

TEST(FlowNetwork, EmptyFlowGaussianAndLaplaceAtZero) {
  FlowNetwork gauss(Prior::kGaussian, {});
  FlowNetwork laplace(Prior::kLaplace, {});
  Tensor y({1, 1, 2, 2}, 0.0);
  EXPECT_NEAR(gauss.Encode(y, {}).nll.at(0), 2 * std::log(2 * std::numbers::pi),
              1e-14);
  EXPECT_NEAR(laplace.Encode(y, {}).nll.at(0), 4 * std::numbers::ln2, 1e-14);
}

TEST(FlowNetwork, PerDimTimesDimsIsTotal) {
  Fixture f = Build(Small(2, 2), {2, 3, 8, 8}, 1);
  EncodeResult r = f.flow.Encode(f.y, f.e);
  EXPECT_EQ(r.dims, 192);
  for (int i = 0; i < 2; ++i) {
    EXPECT_DOUBLE_EQ(r.nll_per_dim.at(i) * 192, r.nll.at(i));
  }
}

TEST(FlowNetwork, LogdetIsSumOfLayerContributions) {
  Fixture f = Build(Small(2, 2), {1, 3, 8, 8}, 2);
  LogdetTrace trace;
  f.flow.Encode(f.y, f.e, &trace);
  double sum = 0;
  for (const auto& [name, delta] : trace.layers) sum += delta[0];
  EXPECT_NEAR(sum, trace.total[0], 1e-10 * std::max(1.0, std::fabs(sum)));
  EXPECT_EQ(trace.layers.size(), 2u * (1 + 2 * 4));
}

TEST(FlowNetwork, BijectivityAllConfigs) {
  for (int levels : {1, 2})
    for (int steps = 1; steps <= 4; ++steps)
      for (Prior prior : {Prior::kGaussian, Prior::kLaplace}) {
        FlowConfig c = Small(levels, steps);
        c.prior = prior;
        EXPECT_LT(RoundTripError(c, 20, 100 + steps, 8, 8), 1e-9)
            << levels << "/" << steps << "/" << PriorName(prior);
      }
}

TEST(FlowNetwork, DecodeThenEncodeIsIdentity) {
  Fixture f = Build(Small(2, 2), {1, 3, 8, 8}, 3);
  f.flow.Encode(f.y, f.e);  // initializes ActNorm
  Rng rng(9);
  LatentSample z = f.flow.SampleLatent(f.y.shape(), 0.5, rng);
  LatentSample back = f.flow.Encode(f.flow.Decode(z, f.e), f.e).latent;
  ASSERT_EQ(back.z.size(), z.z.size());
  for (std::size_t i = 0; i < z.z.size(); ++i) {
    EXPECT_LT(MaxAbsDiff(back.z[i], z.z[i]), 1e-9);
  }
}

TEST(FlowNetwork, LatentSizeMatchesInput) {
  Fixture f = Build(Small(2, 1), {1, 3, 8, 8}, 4);
  std::int64_t total = 0;
  for (const Shape& s : f.flow.LatentShapes(f.y.shape())) total += NumElements(s);
  EXPECT_EQ(total, f.y.numel());
  EXPECT_THROW(f.flow.Encode(Tensor({1, 3, 6, 6}), f.e), ShapeError);
}

TEST(FlowNetwork, SplitMatchesUnsplitScoring) {
  auto stages = [](bool split) {
    Rng rng(5);
    std::vector<FlowNetwork::Stage> out(2);
    out[0].name = "a";
    out[0].layers.emplace_back("squeeze", std::make_unique<Squeeze>());
    auto act = std::make_unique<ActNorm>(8);
    act->InitializeFrom(rng.NormalTensor({2, 8, 2, 2}));
    out[0].layers.emplace_back("actnorm", std::move(act));
    out[0].layers.emplace_back("mix", std::make_unique<OrthoMix>(8, rng));
    out[0].split_after = split;
    out[1].name = "b";
    return out;
  };
  Rng rng(6);
  Tensor y = rng.NormalTensor({2, 2, 4, 4});
  for (Prior prior : {Prior::kGaussian, Prior::kLaplace}) {
    FlowNetwork with(prior, stages(true));
    FlowNetwork without(prior, stages(false));
    EncodeResult a = with.Encode(y, {});
    EncodeResult b = without.Encode(y, {});
    EXPECT_EQ(a.latent.z.size(), 2u);
    EXPECT_EQ(b.latent.z.size(), 1u);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(a.nll.at(i), b.nll.at(i), 1e-12);
  }
}

TEST(FlowNetwork, NllGradientMatchesFiniteDifferences) {
  FlowConfig c = Small(1, 1, 4, 2);
  Fixture f = Build(c, {1, 4, 4, 4}, 7);
  StateList state;
  f.flow.Collect("flow", state);
  for (const NamedTensor& block : TrainableOnly(state)) {
    ZeroGrad(state);
    Sum(f.flow.Encode(f.y, f.e).nll).backward();
    std::vector<double> analytic(block.tensor.grad().begin(), block.tensor.grad().end());
    if (analytic.empty()) analytic.assign(block.tensor.numel(), 0.0);
    Tensor leaf = block.tensor;
    std::vector<double> saved(leaf.values().begin(), leaf.values().end());
    auto nll_at = [&](const Tensor& p) {
      std::copy(p.values().begin(), p.values().end(), leaf.mutable_values().begin());
      NoGradGuard guard;
      const double v = Sum(f.flow.Encode(f.y, f.e).nll).item();
      std::copy(saved.begin(), saved.end(), leaf.mutable_values().begin());
      return v;
    };
    Tensor numeric = FiniteDifferenceGradient(nll_at, Tensor(leaf.shape(), saved));
    EXPECT_LT(MaxRelativeError(analytic, numeric.values()), 1e-5) << block.path;
  }
}

TEST(FlowNetwork, DensityIntegratesToOne) {
  FlowConfig c = Small(1, 2, 1, 2);
  Fixture f = Build(c, {1, 1, 2, 2}, 8, 0.3);
  Rng rng(10);
  // Importance sampling with a N(0, 1.5^2) proposal truncated to [-6, 6]^4.
  const double sigma = 1.5;
  const int batches = 20, per = 2000;
  double total = 0;
  LrEmbedding e;
  for (const Tensor& level : f.e.levels) {
    std::vector<double> v;
    for (int i = 0; i < per; ++i) v.insert(v.end(), level.values().begin(), level.values().end());
    e.levels.emplace_back(Shape{per, level.dim(1), level.dim(2), level.dim(3)}, v);
  }
  NoGradGuard guard;
  for (int b = 0; b < batches; ++b) {
    Tensor y = rng.NormalTensor({per, 1, 2, 2}, sigma);
    EncodeResult r = f.flow.Encode(y, e);
    for (int i = 0; i < per; ++i) {
      bool inside = true;
      double log_q = 0;
      for (int d = 0; d < 4; ++d) {
        const double v = y.at(i * 4 + d);
        inside = inside && std::fabs(v) <= 6;
        log_q += -0.5 * v * v / (sigma * sigma) - std::log(sigma * std::sqrt(2 * std::numbers::pi));
      }
      if (inside) total += std::exp(-r.nll.at(i) - log_q);
    }
  }
  const double mass = total / (batches * per);
  EXPECT_NEAR(mass, 1.0, 0.05);
}

TEST(Sampling, TemperatureVarianceAndDeterminism) {
  Fixture f = Build(Small(2, 1), {1, 3, 8, 8}, 11);
  Rng rng(12);
  double sum = 0, sq = 0;
  std::int64_t count = 0;
  while (count < 100000) {
    LatentSample z = f.flow.SampleLatent({16, 3, 8, 8}, 0.81, rng);
    for (const Tensor& part : z.z)
      for (double v : part.values()) {
        sum += v;
        sq += v * v;
        ++count;
      }
  }
  const double mean = sum / count;
  EXPECT_NEAR(sq / count - mean * mean, 0.81, 0.0081);

  f.flow.Encode(f.y, f.e);
  Tensor a = f.flow.Sample(f.e, 0.0, 1);
  Tensor b = f.flow.Sample(f.e, 0.0, 2);
  EXPECT_EQ(MaxAbsDiff(a, b), 0.0);
  LatentSample zero = f.flow.SampleLatent(f.y.shape(), 0.0, rng);
  for (const Tensor& part : zero.z)
    for (double v : part.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(MaxAbsDiff(f.flow.Decode(zero, f.e), a), 0.0);
  EXPECT_GT(MaxAbsDiff(f.flow.Sample(f.e, 1.0, 1), f.flow.Sample(f.e, 1.0, 2)), 0.0);
  EXPECT_THROW(f.flow.SampleLatent(f.y.shape(), -0.1, rng), DomainError);
}

TEST(Sampling, DistinctLatentsGiveDistinctImages) {
  Fixture f = Build(Small(2, 2), {1, 3, 8, 8}, 13);
  f.flow.Encode(f.y, f.e);
  Rng rng(14);
  LatentSample z1 = f.flow.SampleLatent(f.y.shape(), 1.0, rng);
  LatentSample z2 = f.flow.SampleLatent(f.y.shape(), 1.0, rng);
  EXPECT_GT(MaxAbsDiff(f.flow.Decode(z1, f.e), f.flow.Decode(z2, f.e)), 0.0);
}

RunConfig TinyRun() {
  RunConfig c = RunConfig::Defaults();
  c.data.scale = 2;
  c.encoder.width = 4;
  c.encoder.blocks = 2;
  c.encoder.taps = {1, 2};
  c.flow.levels = 2;
  c.flow.steps = 1;
  c.flow.hidden_channels = 8;
  c.Sync();
  return c;
}

TEST(NllLoss, BatchPermutationInvariant) {
  RunConfig c = TinyRun();
  Rng rng(15);
  FlowSrModel model(c, rng);
  Dataset data = MakeSyntheticDataset(4, 8, 2, 3);
  std::vector<Tensor> hr, lr;
  for (int i = 0; i < 4; ++i) {
    hr.push_back(data.pair(i).hr);
    lr.push_back(data.pair(i).lr);
  }
  model.NllPerDim(ConcatBatch(hr), ConcatBatch(lr));  // ActNorm init
  const double a = Mean(model.NllPerDim(ConcatBatch(hr), ConcatBatch(lr))).item();
  std::swap(hr[0], hr[3]);
  std::swap(lr[0], lr[3]);
  std::swap(hr[1], hr[2]);
  std::swap(lr[1], lr[2]);
  const double b = Mean(model.NllPerDim(ConcatBatch(hr), ConcatBatch(lr))).item();
  EXPECT_NEAR(a, b, 1e-13);
}

TEST(NllLoss, OverfitsFixedBatch) {
  RunConfig c = TinyRun();
  Rng rng(16);
  FlowSrModel model(c, rng);
  Dataset data = MakeSyntheticDataset(10, 8, 2, 4);
  std::vector<Tensor> hr, lr;
  for (int i = 0; i < 10; ++i) {
    hr.push_back(data.pair(i).hr);
    lr.push_back(data.pair(i).lr);
  }
  Tensor y = ConcatBatch(hr), x = ConcatBatch(lr);
  StateList params;
  model.Collect(params);
  Adam opt(params);
  double previous = INFINITY;
  int increases = 0;
  for (int step = 0; step < 200; ++step) {
    opt.ZeroGrad();
    Tensor loss = Mean(model.NllPerDim(y, x));
    if (loss.item() >= previous) ++increases;
    previous = loss.item();
    loss.backward();
    opt.Step(2e-4);
  }
  EXPECT_EQ(increases, 0);
}

}  // namespace
}  // namespace flowfid
