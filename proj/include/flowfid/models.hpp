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

#ifndef FLOWFID_MODELS_HPP_
#define FLOWFID_MODELS_HPP_

#include <memory>

#include "flowfid/config.hpp"
#include "flowfid/encoder.hpp"
#include "flowfid/flow_network.hpp"
#include "flowfid/laplace.hpp"

namespace flowfid {

// A super-resolution model with a likelihood-style fidelity objective.
class SrModel {
 public:
  virtual ~SrModel() = default;
  virtual ModelKind kind() const = 0;
  // Per-item negative log-likelihood in nats per HR dimension, shape (N).
  virtual Tensor NllPerDim(const Tensor& hr, const Tensor& lr) = 0;
  // Differentiable SR prediction. Deterministic models ignore tau and rng.
  virtual Tensor Generate(const Tensor& lr, double tau, Rng& rng) = 0;
  virtual bool stochastic() const = 0;
  virtual void Collect(StateList& out) const = 0;
};

class FlowSrModel : public SrModel {
 public:
  FlowSrModel(const RunConfig& config, Rng& rng);
  ModelKind kind() const override { return ModelKind::kFlow; }
  Tensor NllPerDim(const Tensor& hr, const Tensor& lr) override;
  Tensor Generate(const Tensor& lr, double tau, Rng& rng) override;
  bool stochastic() const override { return true; }
  void Collect(StateList& out) const override;

  LrEmbedding Embed(const Tensor& lr, std::int64_t hr_h, std::int64_t hr_w) const;
  FlowNetwork& flow() { return flow_; }
  LrEncoder& encoder() { return encoder_; }

 private:
  int scale_;
  LrEncoder encoder_;
  FlowNetwork flow_;
};

// Encoder features -> 3x3 conv -> depth-to-space. With adaptive variance the
// head emits 2C channels, (g, a = log b).
class LaplaceSrModel : public SrModel {
 public:
  LaplaceSrModel(const RunConfig& config, bool adaptive, Rng& rng);
  ModelKind kind() const override {
    return adaptive_ ? ModelKind::kLaplace : ModelKind::kL1;
  }
  Tensor NllPerDim(const Tensor& hr, const Tensor& lr) override;
  Tensor Generate(const Tensor& lr, double tau, Rng& rng) override;
  bool stochastic() const override { return false; }
  void Collect(StateList& out) const override;

  LaplaceHead Head(const Tensor& lr) const;

 private:
  int scale_;
  int channels_;
  bool adaptive_;
  int dequant_bins_;
  LrEncoder encoder_;
  Conv2dModule head_;
};

std::unique_ptr<SrModel> BuildModel(const RunConfig& config, Rng& rng);

}  // namespace flowfid

#endif  // FLOWFID_MODELS_HPP_
