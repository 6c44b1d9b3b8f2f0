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

#include "flowfid/flow_network.hpp"

#include <cmath>
#include <numbers>

#include "flowfid/error.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {

std::string PriorName(Prior prior) {
  return prior == Prior::kGaussian ? "gaussian" : "laplace";
}

Prior ParsePrior(const std::string& name) {
  if (name == "gaussian") return Prior::kGaussian;
  if (name == "laplace") return Prior::kLaplace;
  throw ConfigError("unknown prior '" + name + "' (expected gaussian|laplace)");
}

void FlowConfig::Validate() const {
  if (levels < 1) throw ConfigError("flow.levels must be >= 1");
  if (steps < 1) throw ConfigError("flow.steps must be >= 1");
  if (image_channels < 1) throw ConfigError("flow.image_channels must be >= 1");
  if (cond_channels < 0) throw ConfigError("flow.cond_channels must be >= 0");
  if (hidden_channels < 1) throw ConfigError("flow.hidden must be >= 1");
  if (scale_factor < 1) throw ConfigError("scale factor must be >= 1");
  if (!(scale_clamp > 0)) throw ConfigError("flow.clamp must be positive");
  if (dequant_bins < 0) throw ConfigError("flow.dequant_bins must be >= 0");
}

Tensor PriorNll(Prior prior, const Tensor& z) {
  if (prior == Prior::kGaussian) {
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    return Sum(0.5 * Square(z) + half_log_2pi, {1, 2, 3});
  }
  return Sum(Abs(z) + std::numbers::ln2, {1, 2, 3});
}

FlowNetwork::FlowNetwork(const FlowConfig& config, Rng& rng) : config_(config) {
  config_.Validate();
  int channels = config_.image_channels;
  for (int l = 0; l < config_.levels; ++l) {
    Stage stage;
    stage.name = "level" + std::to_string(l);
    stage.cond_level = l;
    stage.split_after = l + 1 < config_.levels;
    stage.layers.emplace_back("squeeze", std::make_unique<Squeeze>());
    channels *= 4;
    for (int k = 0; k < config_.steps; ++k) {
      const std::string step = "step" + std::to_string(k);
      stage.layers.emplace_back(step + ".actnorm",
                                std::make_unique<ActNorm>(channels));
      stage.layers.emplace_back(step + ".orthomix",
                                std::make_unique<OrthoMix>(channels, rng));
      stage.layers.emplace_back(
          step + ".coupling",
          std::make_unique<CondAffineCoupling>(
              channels, config_.cond_channels, config_.hidden_channels, rng,
              config_.scale_clamp));
      stage.layers.emplace_back(
          step + ".injector",
          std::make_unique<AffineInjector>(channels, config_.cond_channels,
                                           config_.hidden_channels, rng,
                                           config_.scale_clamp));
    }
    if (stage.split_after) channels /= 2;
    stages_.push_back(std::move(stage));
  }
}

FlowNetwork::FlowNetwork(Prior prior, std::vector<Stage> stages,
                         int dequant_bins)
    : stages_(std::move(stages)) {
  config_.prior = prior;
  config_.levels = static_cast<int>(stages_.size());
  config_.steps = 0;
  config_.dequant_bins = dequant_bins;
}

EncodeResult FlowNetwork::Encode(const Tensor& y, const LrEmbedding& e,
                                 LogdetTrace* trace) {
  if (y.rank() != 4) {
    throw ShapeError("flow encode expects NCHW, got " + ShapeToString(y.shape()));
  }
  const std::int64_t n = y.dim(0);
  LatentShapes(y.shape());  // validates divisibility

  LayerIO io{y, Tensor(Shape{n}, 0.0)};
  EncodeResult result;
  result.latent.prior = config_.prior;
  for (auto& stage : stages_) {
    Tensor cond;
    if (stage.cond_level >= 0) {
      if (stage.cond_level >= static_cast<int>(e.levels.size())) {
        throw ShapeError("embedding has no level " +
                         std::to_string(stage.cond_level));
      }
      cond = e.levels[stage.cond_level];
    }
    for (auto& [name, layer] : stage.layers) {
      if (trace != nullptr) {
        std::vector<double> before(io.logdet.values().begin(),
                                   io.logdet.values().end());
        io = layer->Forward(io, cond);
        std::vector<double> delta(before.size());
        for (std::size_t i = 0; i < delta.size(); ++i) {
          delta[i] = io.logdet.values()[i] - before[i];
        }
        trace->layers.emplace_back(stage.name + "." + name, std::move(delta));
      } else {
        io = layer->Forward(io, cond);
      }
    }
    if (stage.split_after) {
      SplitResult split = SplitChannels(io.activation);
      result.latent.z.push_back(split.emitted);
      io.activation = split.kept;
    }
  }
  result.latent.z.push_back(io.activation);
  if (trace != nullptr) {
    trace->total.assign(io.logdet.values().begin(), io.logdet.values().end());
  }

  Tensor prior_nll = PriorNll(config_.prior, result.latent.z[0]);
  for (std::size_t i = 1; i < result.latent.z.size(); ++i) {
    prior_nll = prior_nll + PriorNll(config_.prior, result.latent.z[i]);
  }
  result.dims = y.numel() / n;
  Tensor nll = prior_nll - io.logdet;
  if (config_.dequant_bins > 0) {
    nll = nll + static_cast<double>(result.dims) *
                    std::log(static_cast<double>(config_.dequant_bins));
  }
  result.nll = nll;
  result.nll_per_dim = nll / static_cast<double>(result.dims);
  return result;
}

std::vector<Shape> FlowNetwork::LatentShapes(const Shape& y_shape) const {
  std::vector<Shape> shapes;
  Shape s = y_shape;
  for (const auto& stage : stages_) {
    for (const auto& [name, layer] : stage.layers) s = layer->OutputShape(s);
    if (stage.split_after) {
      if (s[1] % 2 != 0) {
        throw ShapeError("split needs an even channel count at " + stage.name);
      }
      s[1] /= 2;
      shapes.push_back(s);
    }
  }
  shapes.push_back(s);
  return shapes;
}

Shape FlowNetwork::InputShapeFor(const std::vector<Tensor>& z) const {
  std::size_t splits = 0;
  for (const auto& stage : stages_) splits += stage.split_after ? 1 : 0;
  if (z.size() != splits + 1) {
    throw ShapeError("latent has " + std::to_string(z.size()) +
                     " parts, flow expects " + std::to_string(splits + 1));
  }
  Shape s = z.back().shape();
  std::size_t next = splits;
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
    if (it->split_after) {
      const Shape& emitted = z[--next].shape();
      if (emitted != s) {
        throw ShapeError("latent part " + std::to_string(next) + " has shape " +
                         ShapeToString(emitted) + ", expected " +
                         ShapeToString(s));
      }
      s[1] *= 2;
    }
    for (auto layer = it->layers.rbegin(); layer != it->layers.rend(); ++layer) {
      s = layer->second->InputShape(s);
    }
  }
  return s;
}

Tensor FlowNetwork::Decode(const LatentSample& z, const LrEmbedding& e) {
  const Shape y_shape = InputShapeFor(z.z);
  if (LatentShapes(y_shape).back() != z.z.back().shape()) {
    throw ShapeError("latent shapes inconsistent with flow layout");
  }
  const std::int64_t n = y_shape[0];
  LayerIO io{z.z.back(), Tensor(Shape{n}, 0.0)};
  std::size_t next = z.z.size() - 1;
  for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
    Tensor cond;
    if (it->cond_level >= 0) {
      if (it->cond_level >= static_cast<int>(e.levels.size())) {
        throw ShapeError("embedding has no level " +
                         std::to_string(it->cond_level));
      }
      cond = e.levels[it->cond_level];
    }
    if (it->split_after) {
      io.activation = MergeChannels(io.activation, z.z[--next]);
    }
    for (auto layer = it->layers.rbegin(); layer != it->layers.rend(); ++layer) {
      io = layer->second->Inverse(io, cond);
    }
  }
  return io.activation;
}

Shape FlowNetwork::OutputShapeFor(const LrEmbedding& e) const {
  if (e.levels.empty()) throw ShapeError("empty embedding");
  const Tensor& first = e.levels[0];
  return {first.dim(0), config_.image_channels, first.dim(2) * 2,
          first.dim(3) * 2};
}

std::vector<std::pair<std::int64_t, std::int64_t>> FlowNetwork::LevelGrids(
    std::int64_t height, std::int64_t width) const {
  std::vector<std::pair<std::int64_t, std::int64_t>> grids;
  const std::int64_t div = std::int64_t{1} << config_.levels;
  if (height % div != 0 || width % div != 0) {
    throw ShapeError("spatial extents " + std::to_string(height) + "x" +
                     std::to_string(width) + " not divisible by 2^" +
                     std::to_string(config_.levels));
  }
  for (int l = 0; l < config_.levels; ++l) {
    grids.emplace_back(height >> (l + 1), width >> (l + 1));
  }
  return grids;
}

LatentSample FlowNetwork::SampleLatent(const Shape& y_shape, double tau,
                                       Rng& rng) const {
  if (!(tau >= 0)) throw DomainError("temperature must be >= 0");
  LatentSample sample;
  sample.prior = config_.prior;
  sample.temperature = tau;
  const double scale = std::sqrt(tau);
  for (const Shape& shape : LatentShapes(y_shape)) {
    std::vector<double> v(static_cast<std::size_t>(NumElements(shape)));
    for (double& x : v) {
      x = scale * (config_.prior == Prior::kGaussian ? rng.Normal() : rng.Laplace());
      if (scale == 0.0) x = 0.0;  // no -0.0 from negative draws
    }
    sample.z.emplace_back(shape, std::move(v));
  }
  return sample;
}

Tensor FlowNetwork::Sample(const LrEmbedding& e, double tau, Rng& rng) {
  return Decode(SampleLatent(OutputShapeFor(e), tau, rng), e);
}

Tensor FlowNetwork::Sample(const LrEmbedding& e, double tau,
                           std::uint64_t seed) {
  Rng rng(seed);
  return Sample(e, tau, rng);
}

void FlowNetwork::Collect(const std::string& prefix, StateList& out) const {
  for (const auto& stage : stages_) {
    for (const auto& [name, layer] : stage.layers) {
      layer->Collect(prefix + "." + stage.name + "." + name, out);
    }
  }
}

}  // namespace flowfid
