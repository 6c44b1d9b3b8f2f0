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

#ifndef FLOWFID_CONFIG_HPP_
#define FLOWFID_CONFIG_HPP_

#include <optional>
#include <string>
#include <vector>

#include "flowfid/discriminator.hpp"
#include "flowfid/encoder.hpp"
#include "flowfid/flow_network.hpp"

namespace flowfid {

// Which fidelity model a run trains.
//   flow      conditional flow pyramid
//   l1        encoder + pixel-shuffle head under the L1 (unit Laplace) loss
//   laplace   same head with a predicted per-pixel log-scale
enum class ModelKind { kFlow, kL1, kLaplace };
std::string ModelKindName(ModelKind kind);
ModelKind ParseModelKind(const std::string& name);

struct TrainConfig {
  int phase1_iters = 2000;
  int phase2_iters = 1000;
  double lr = 1e-4;
  // Unset means the scale-dependent default, see ResolvedDiscLr().
  std::optional<double> disc_lr;
  std::optional<double> lambda_adv;
  int batch = 8;
  int patch = 32;
  // Total width of the uniform dequantization noise.
  double noise = 1.0 / 32.0;
  std::uint64_t seed = 0;
  AdversarialForm adv = AdversarialForm::kPlain;
  // Temperature of the flow samples shown to the discriminator.
  double train_tau = 1.0;
  int eval_every = 250;
  int val_images = 8;
};

struct DataConfig {
  // Manifest file; alternatively `synthetic` > 0 builds a procedural set.
  std::string manifest;
  int synthetic = 0;
  int synthetic_size = 32;
  std::uint64_t seed = 0;
  int scale = 4;
};

struct RunConfig {
  ModelKind model = ModelKind::kFlow;
  FlowConfig flow;
  EncoderConfig encoder;
  int disc_width = 16;
  TrainConfig train;
  DataConfig data;
  std::string out_dir = "runs/default";

  // Defaults for toy-scale training: dequantized likelihood, modest widths.
  static RunConfig Defaults();

  // Copies the shared fields (scale, encoder width) into the sub-configs.
  void Sync();
  // Every problem found, each naming its field; empty when valid.
  std::vector<std::string> Problems() const;
  // Throws ConfigError listing all problems.
  void Validate() const;

  double ResolvedDiscLr() const;
  double ResolvedLambdaAdv() const;
  DiscriminatorConfig disc() const;

  // Deterministic INI text; Parse(ToText()) reproduces the config.
  std::string ToText() const;
  static RunConfig Parse(const std::string& text);
  static RunConfig Load(const std::string& path);
};

}  // namespace flowfid

#endif  // FLOWFID_CONFIG_HPP_
