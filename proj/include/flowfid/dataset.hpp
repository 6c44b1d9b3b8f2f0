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

#ifndef FLOWFID_DATASET_HPP_
#define FLOWFID_DATASET_HPP_

#include <string>
#include <vector>

#include "flowfid/random.hpp"
#include "flowfid/tensor.hpp"

namespace flowfid {

// HR/LR pair; lr is always computed from hr, never loaded.
struct ImagePair {
  std::string id;
  Tensor hr;  // (1,C,H,W) in [0,1], extents multiples of scale
  Tensor lr;  // (1,C,H/scale,W/scale)
  int scale = 4;
  std::string kernel = "bicubic";
};

// Crops hr to a multiple of scale and derives lr by bicubic downsampling.
ImagePair MakeImagePair(std::string id, const Tensor& hr, int scale);

struct ImageBatch {
  Tensor hr;  // (N,C,H,W)
  Tensor lr;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ImagePair> pairs, int scale);

  std::size_t size() const { return pairs_.size(); }
  int scale() const { return scale_; }
  const ImagePair& pair(std::size_t i) const { return pairs_.at(i); }

  // `batch` random pairs (with replacement), each cropped to a random
  // scale-aligned patch x patch window. The draw sequence depends only on
  // the rng state.
  ImageBatch SampleBatch(int batch, int patch, Rng& rng) const;

  // Pairs [begin, end) as a new dataset.
  Dataset Slice(std::size_t begin, std::size_t end) const;

 private:
  std::vector<ImagePair> pairs_;
  int scale_ = 4;
};

// One procedural RGB image: smooth color gradient, a few band-limited
// sinusoids and a hard edge, clamped to [0,1].
Tensor SyntheticImage(int size, Rng& rng);
Dataset MakeSyntheticDataset(int count, int size, int scale, std::uint64_t seed);

// Human-readable key-value dataset description:
//   scale = 4
//   kernel = bicubic
//   seed = 7
//   image = photos/a.png        (repeatable)
//   synthetic = 500             (procedural images instead of files)
//   synthetic_size = 32
struct DatasetManifest {
  std::vector<std::string> images;
  int scale = 4;
  std::string kernel = "bicubic";
  std::uint64_t seed = 0;
  int synthetic = 0;
  int synthetic_size = 32;
};

DatasetManifest ParseManifest(const std::string& text,
                              const std::string& base_dir = "");
DatasetManifest LoadManifest(const std::string& path);
std::string FormatManifest(const DatasetManifest& manifest);
Dataset LoadDataset(const DatasetManifest& manifest);

}  // namespace flowfid

#endif  // FLOWFID_DATASET_HPP_
