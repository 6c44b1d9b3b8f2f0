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

#include "flowfid/models.hpp"

#include <cmath>
#include <numbers>

#include "flowfid/error.hpp"
#include "flowfid/laplace.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {
namespace {

FlowConfig SyncedFlow(const RunConfig& config) {
  RunConfig c = config;
  c.Sync();
  return c.flow;
}

}  // namespace

FlowSrModel::FlowSrModel(const RunConfig& config, Rng& rng)
    : scale_(config.data.scale),
      encoder_(config.encoder, rng),
      flow_(SyncedFlow(config), rng) {}

LrEmbedding FlowSrModel::Embed(const Tensor& lr, std::int64_t hr_h,
                               std::int64_t hr_w) const {
  return encoder_.Embed(lr, flow_.LevelGrids(hr_h, hr_w));
}

Tensor FlowSrModel::NllPerDim(const Tensor& hr, const Tensor& lr) {
  if (hr.dim(2) != lr.dim(2) * scale_ || hr.dim(3) != lr.dim(3) * scale_) {
    throw ShapeError("hr " + ShapeToString(hr.shape()) + " is not lr " +
                     ShapeToString(lr.shape()) + " x" + std::to_string(scale_));
  }
  return flow_.Encode(hr, Embed(lr, hr.dim(2), hr.dim(3))).nll_per_dim;
}

Tensor FlowSrModel::Generate(const Tensor& lr, double tau, Rng& rng) {
  return flow_.Sample(Embed(lr, lr.dim(2) * scale_, lr.dim(3) * scale_), tau, rng);
}

void FlowSrModel::Collect(StateList& out) const {
  encoder_.Collect("encoder", out);
  flow_.Collect("flow", out);
}

LaplaceSrModel::LaplaceSrModel(const RunConfig& config, bool adaptive, Rng& rng)
    : scale_(config.data.scale),
      channels_(config.encoder.in_channels),
      adaptive_(adaptive),
      dequant_bins_(config.flow.dequant_bins),
      encoder_(config.encoder, rng),
      head_(config.encoder.out_channels(),
            (adaptive ? 2 : 1) * channels_ * scale_ * scale_, 3, 1, 1, rng,
            /*zero_init=*/true) {}

LaplaceHead LaplaceSrModel::Head(const Tensor& lr) const {
  Tensor out = DepthToSpace(head_(encoder_.Features(lr)), scale_);
  if (!adaptive_) return {out, Tensor()};
  // Channels come out as (g ++ a) because depth-to-space keeps channel
  // groups contiguous.
  return AdaptiveVarianceHead(out);
}

Tensor LaplaceSrModel::NllPerDim(const Tensor& hr, const Tensor& lr) {
  LaplaceHead head = Head(lr);
  if (head.g.shape() != hr.shape()) {
    throw ShapeError("prediction " + ShapeToString(head.g.shape()) +
                     " vs target " + ShapeToString(hr.shape()));
  }
  const double dims = static_cast<double>(hr.dim(1) * hr.dim(2) * hr.dim(3));
  Tensor residual = Abs(hr - head.g);
  Tensor per_elem = adaptive_ ? residual * Exp(-head.a) + head.a : residual;
  double constant = std::numbers::ln2;
  if (dequant_bins_ > 0) constant += std::log(static_cast<double>(dequant_bins_));
  return Sum(per_elem, {1, 2, 3}) / dims + constant;
}

Tensor LaplaceSrModel::Generate(const Tensor& lr, double, Rng&) {
  return Head(lr).g;
}

void LaplaceSrModel::Collect(StateList& out) const {
  encoder_.Collect("encoder", out);
  head_.Collect("head", out);
}

std::unique_ptr<SrModel> BuildModel(const RunConfig& config, Rng& rng) {
  switch (config.model) {
    case ModelKind::kFlow: return std::make_unique<FlowSrModel>(config, rng);
    case ModelKind::kL1: return std::make_unique<LaplaceSrModel>(config, false, rng);
    case ModelKind::kLaplace:
      return std::make_unique<LaplaceSrModel>(config, true, rng);
  }
  throw ConfigError("unknown model kind");
}

}  // namespace flowfid
