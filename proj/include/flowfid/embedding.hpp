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

#ifndef FLOWFID_EMBEDDING_HPP_
#define FLOWFID_EMBEDDING_HPP_

#include <vector>

#include "flowfid/tensor.hpp"

namespace flowfid {

// Conditioning features of the LR image, resampled once per flow level.
struct LrEmbedding {
  // levels[l] is (N, channels, h_l, w_l) where (h_l, w_l) is the activation
  // grid of flow level l.
  std::vector<Tensor> levels;
  // 1-based indices of the encoder blocks whose outputs were concatenated.
  std::vector<int> source_blocks;
};

}  // namespace flowfid

#endif  // FLOWFID_EMBEDDING_HPP_
