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

#ifndef FLOWFID_ENCODER_HPP_
#define FLOWFID_ENCODER_HPP_

#include <utility>
#include <vector>

#include "flowfid/embedding.hpp"
#include "flowfid/nn.hpp"

namespace flowfid {

struct EncoderConfig {
  int in_channels = 3;
  int width = 32;
  int blocks = 4;
  // 1-based residual block indices whose outputs are concatenated.
  std::vector<int> taps{1, 2, 3, 4};

  int out_channels() const { return static_cast<int>(taps.size()) * width; }
  void Validate() const;
};

// Toy LR encoder: a 3x3 stem followed by residual blocks
// x + conv(silu(conv(x))); the tapped block outputs are concatenated.
class LrEncoder {
 public:
  LrEncoder(const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  // (N, taps * width, h, w) at LR resolution.
  Tensor Features(const Tensor& x) const;
  // Features resampled to each (h, w) grid.
  LrEmbedding Embed(const Tensor& x,
                    const std::vector<std::pair<std::int64_t, std::int64_t>>&
                        grids) const;

  void Collect(const std::string& prefix, StateList& out) const;

 private:
  EncoderConfig config_;
  Conv2dModule stem_;
  std::vector<std::pair<Conv2dModule, Conv2dModule>> blocks_;
};

// Integer upscales replicate pixels, integer downscales average blocks,
// anything else falls back to nearest-neighbor sampling.
Tensor ResizeToGrid(const Tensor& features, std::int64_t height,
                    std::int64_t width);

}  // namespace flowfid

#endif  // FLOWFID_ENCODER_HPP_
