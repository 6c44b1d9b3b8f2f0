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

#include "flowfid/encoder.hpp"

#include <algorithm>

#include "flowfid/error.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {

void EncoderConfig::Validate() const {
  if (in_channels < 1) throw ConfigError("encoder.in_channels must be >= 1");
  if (width < 1) throw ConfigError("encoder.width must be >= 1");
  if (blocks < 1) throw ConfigError("encoder.blocks must be >= 1");
  if (taps.empty()) throw ConfigError("encoder.taps must not be empty");
  for (int t : taps) {
    if (t < 1 || t > blocks) {
      throw ConfigError("encoder.taps entry " + std::to_string(t) +
                        " outside 1.." + std::to_string(blocks));
    }
  }
}

LrEncoder::LrEncoder(const EncoderConfig& config, Rng& rng) : config_(config) {
  config_.Validate();
  stem_ = Conv2dModule(config_.in_channels, config_.width, 3, 1, 1, rng);
  for (int b = 0; b < config_.blocks; ++b) {
    Conv2dModule first(config_.width, config_.width, 3, 1, 1, rng);
    Conv2dModule second(config_.width, config_.width, 3, 1, 1, rng);
    blocks_.emplace_back(std::move(first), std::move(second));
  }
}

Tensor LrEncoder::Features(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != config_.in_channels) {
    throw ShapeError("encoder input " + ShapeToString(x.shape()));
  }
  Tensor h = stem_(x);
  std::vector<Tensor> tapped;
  for (int b = 0; b < config_.blocks; ++b) {
    h = h + blocks_[b].second(Silu(blocks_[b].first(h)));
    if (std::find(config_.taps.begin(), config_.taps.end(), b + 1) !=
        config_.taps.end()) {
      tapped.push_back(h);
    }
  }
  return tapped.size() == 1 ? tapped[0] : ConcatChannels(tapped);
}

LrEmbedding LrEncoder::Embed(
    const Tensor& x,
    const std::vector<std::pair<std::int64_t, std::int64_t>>& grids) const {
  Tensor features = Features(x);
  LrEmbedding e;
  e.source_blocks = config_.taps;
  for (const auto& [h, w] : grids) e.levels.push_back(ResizeToGrid(features, h, w));
  return e;
}

void LrEncoder::Collect(const std::string& prefix, StateList& out) const {
  stem_.Collect(prefix + ".stem", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::string name = prefix + ".block" + std::to_string(b + 1);
    blocks_[b].first.Collect(name + ".conv0", out);
    blocks_[b].second.Collect(name + ".conv1", out);
  }
}

Tensor ResizeToGrid(const Tensor& features, std::int64_t height,
                    std::int64_t width) {
  const std::int64_t h = features.dim(2), w = features.dim(3);
  if (h == height && w == width) return features;
  if (height % h == 0 && width % w == 0 && height / h == width / w) {
    return UpsampleNearest(features, static_cast<int>(height / h));
  }
  if (h % height == 0 && w % width == 0 && h / height == w / width) {
    return AvgPool(features, static_cast<int>(h / height));
  }
  return ResizeNearest(features, height, width);
}

}  // namespace flowfid
