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

#include "flowfid/laplace.hpp"

#include <numbers>

#include "flowfid/error.hpp"
#include "flowfid/flow_network.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {
namespace {

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + ShapeToString(a.shape()) +
                     " vs " + ShapeToString(b.shape()));
  }
}

}  // namespace

Tensor LaplaceHead::b() const { return Exp(a); }

Tensor L1Loss(const Tensor& y, const Tensor& g) {
  RequireSameShape(y, g, "l1_loss");
  return Sum(Abs(y - g));
}

Tensor LaplaceNll(const Tensor& y, const Tensor& g, const Tensor& b) {
  RequireSameShape(y, g, "laplace_nll");
  RequireSameShape(y, b, "laplace_nll");
  for (double v : b.values()) {
    if (!(v > 0)) throw DomainError("laplace_nll: scale must be positive");
  }
  const double d = static_cast<double>(y.numel());
  return Sum(Abs(y - g) / b) + Sum(Log(b)) + d * std::numbers::ln2;
}

Tensor LaplaceNllLogScale(const Tensor& y, const Tensor& g, const Tensor& a) {
  RequireSameShape(y, g, "laplace_nll");
  RequireSameShape(y, a, "laplace_nll");
  const double d = static_cast<double>(y.numel());
  return Sum(Abs(y - g) / Exp(a)) + Sum(a) + d * std::numbers::ln2;
}

Tensor OneLayerFlowNll(const Tensor& y, const LaplaceHead& head) {
  RequireSameShape(y, head.g, "one_layer_flow_nll");
  RequireSameShape(y, head.a, "one_layer_flow_nll");
  if (y.rank() != 4) throw ShapeError("one_layer_flow_nll expects NCHW");
  std::vector<FlowNetwork::Stage> stages(1);
  stages[0].name = "l1";
  stages[0].cond_level = 0;
  stages[0].layers.emplace_back("scale_bias",
                                std::make_unique<ConditionalScaleBias>());
  FlowNetwork flow(Prior::kLaplace, std::move(stages));
  LrEmbedding e;
  e.levels.push_back(ConcatChannels({head.g, head.a}));
  return Sum(flow.Encode(y, e).nll);
}

LaplaceHead AdaptiveVarianceHead(const Tensor& encoder_output) {
  if (encoder_output.rank() != 4 || encoder_output.dim(1) % 2 != 0) {
    throw ShapeError("adaptive variance head needs 2C channels, got " +
                     ShapeToString(encoder_output.shape()));
  }
  const auto c = encoder_output.dim(1) / 2;
  return {SliceChannels(encoder_output, 0, c),
          SliceChannels(encoder_output, c, 2 * c)};
}

}  // namespace flowfid
