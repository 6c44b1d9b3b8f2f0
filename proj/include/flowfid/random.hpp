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

#ifndef FLOWFID_RANDOM_HPP_
#define FLOWFID_RANDOM_HPP_

#include <cstdint>
#include <random>
#include <string>

#include "flowfid/tensor.hpp"

namespace flowfid {

// Seeded mt19937_64 with stateless transforms on top, so the complete
// generator state is the engine state and round-trips through Serialize().
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t NextU64() { return engine_(); }
  // Open interval (0, 1).
  double Uniform01();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform01(); }
  // [0, n).
  std::uint64_t UniformInt(std::uint64_t n);
  double Normal();
  // Standard Laplace, density exp(-|x|)/2.
  double Laplace();

  Tensor NormalTensor(Shape shape, double stddev = 1.0);
  Tensor UniformTensor(Shape shape, double lo, double hi);

  std::string Serialize() const;
  static Rng Deserialize(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace flowfid

#endif  // FLOWFID_RANDOM_HPP_
