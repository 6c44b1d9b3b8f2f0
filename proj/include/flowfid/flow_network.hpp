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

#ifndef FLOWFID_FLOW_NETWORK_HPP_
#define FLOWFID_FLOW_NETWORK_HPP_

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "flowfid/embedding.hpp"
#include "flowfid/flow_layers.hpp"
#include "flowfid/random.hpp"

namespace flowfid {

enum class Prior { kGaussian, kLaplace };

std::string PriorName(Prior prior);
Prior ParsePrior(const std::string& name);

struct FlowConfig {
  int levels = 2;
  int steps = 4;
  int image_channels = 3;
  int cond_channels = 128;
  int hidden_channels = 32;
  Prior prior = Prior::kGaussian;
  int scale_factor = 4;
  double scale_clamp = kDefaultScaleClamp;
  // When positive, nll includes D*log(bins): the density of the data
  // discretized into bins matching the uniform dequantization noise.
  int dequant_bins = 0;

  void Validate() const;
};

struct LatentSample {
  // One tensor per split, then the final activation.
  std::vector<Tensor> z;
  Prior prior = Prior::kGaussian;
  double temperature = 1.0;
};

struct EncodeResult {
  LatentSample latent;
  Tensor nll;          // (N), nats
  Tensor nll_per_dim;  // (N), nats / D
  std::int64_t dims = 0;
};

// Per-layer log-determinant contributions recorded during Encode.
struct LogdetTrace {
  std::vector<std::pair<std::string, std::vector<double>>> layers;
  std::vector<double> total;
};

// -log p_z(z) summed per item (shape (N)).
Tensor PriorNll(Prior prior, const Tensor& z);

// Invertible pyramid: each stage runs its layers, optionally splitting half
// the channels off to the latent afterwards.
class FlowNetwork {
 public:
  struct Stage {
    std::string name;
    std::vector<std::pair<std::string, std::unique_ptr<InvertibleLayer>>> layers;
    bool split_after = false;
    // Index into LrEmbedding::levels, or -1 for unconditional stages.
    int cond_level = -1;
  };

  // L levels of squeeze + K x (actnorm, orthomix, coupling, injector), split
  // after every level except the last.
  FlowNetwork(const FlowConfig& config, Rng& rng);
  // Arbitrary stage list (possibly empty).
  FlowNetwork(Prior prior, std::vector<Stage> stages, int dequant_bins = 0);

  FlowNetwork(FlowNetwork&&) = default;
  FlowNetwork& operator=(FlowNetwork&&) = default;

  const FlowConfig& config() const { return config_; }
  Prior prior() const { return config_.prior; }
  std::vector<Stage>& stages() { return stages_; }

  EncodeResult Encode(const Tensor& y, const LrEmbedding& e,
                      LogdetTrace* trace = nullptr);
  Tensor Decode(const LatentSample& z, const LrEmbedding& e);

  // Latent shapes for an input of shape y_shape, in LatentSample order.
  std::vector<Shape> LatentShapes(const Shape& y_shape) const;
  // Input shape implied by a latent list; throws on inconsistent shapes.
  Shape InputShapeFor(const std::vector<Tensor>& z) const;
  // HR shape implied by a pyramid embedding.
  Shape OutputShapeFor(const LrEmbedding& e) const;
  // (h, w) of the activation grid each stage conditions on.
  std::vector<std::pair<std::int64_t, std::int64_t>> LevelGrids(
      std::int64_t height, std::int64_t width) const;

  // z entries i.i.d. from the prior scaled by sqrt(tau).
  LatentSample SampleLatent(const Shape& y_shape, double tau, Rng& rng) const;
  Tensor Sample(const LrEmbedding& e, double tau, Rng& rng);
  Tensor Sample(const LrEmbedding& e, double tau, std::uint64_t seed);

  void Collect(const std::string& prefix, StateList& out) const;

 private:
  FlowConfig config_;
  std::vector<Stage> stages_;
};

}  // namespace flowfid

#endif  // FLOWFID_FLOW_NETWORK_HPP_
