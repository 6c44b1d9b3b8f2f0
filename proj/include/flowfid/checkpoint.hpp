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

#ifndef FLOWFID_CHECKPOINT_HPP_
#define FLOWFID_CHECKPOINT_HPP_

#include <string>
#include <utility>
#include <vector>

#include "flowfid/nn.hpp"

namespace flowfid {

// Named float64 array as stored on disk.
struct Block {
  std::string path;
  Shape shape;
  std::vector<double> data;
};

// On-disk layout, in order:
//   flowfid-checkpoint
//   version <n>
//   config <bytes>\n<INI text>
//   params <count>\n      then per block: block <path> f64 <rank> <dims...>\n
//                          followed by numel*8 little-endian bytes
//   optimizer <count>\n   same block encoding
//   state <count>\n       per entry: entry <key> <bytes>\n<text>
// Nothing machine- or time-dependent is written, so identical training
// produces identical files.
struct Checkpoint {
  static constexpr int kVersion = 1;
  std::string config_text;
  std::vector<Block> params;
  std::vector<Block> optimizer;
  std::vector<std::pair<std::string, std::string>> state;

  const std::string& StateValue(const std::string& key) const;
  const Block& OptimizerBlock(const std::string& path) const;
};

std::string SerializeCheckpoint(const Checkpoint& ckpt);
Checkpoint ParseCheckpoint(const std::string& bytes);
void SaveCheckpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint LoadCheckpoint(const std::string& path);

std::vector<Block> CaptureBlocks(const StateList& state);
// Copies values into the tensors of `state`. Names and shapes must match
// one to one; the error names the offending block.
void RestoreBlocks(const std::vector<Block>& blocks, const StateList& state);

}  // namespace flowfid

#endif  // FLOWFID_CHECKPOINT_HPP_
