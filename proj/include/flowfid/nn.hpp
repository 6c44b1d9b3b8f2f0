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

#ifndef FLOWFID_NN_HPP_
#define FLOWFID_NN_HPP_

#include <string>
#include <vector>

#include "flowfid/random.hpp"
#include "flowfid/tensor.hpp"

namespace flowfid {

// A named state block. Trainable blocks are optimized; the rest (fixed
// orthonormal matrices, ActNorm init flags) are only checkpointed.
struct NamedTensor {
  std::string path;
  Tensor tensor;
  bool trainable = true;
};
using StateList = std::vector<NamedTensor>;

StateList TrainableOnly(const StateList& state);
void ZeroGrad(const StateList& state);
std::int64_t CountParameters(const StateList& state);

class Conv2dModule {
 public:
  Conv2dModule() = default;
  // Uniform(+-1/sqrt(fan_in)) weights, zero bias; all zeros with zero_init.
  Conv2dModule(int in_channels, int out_channels, int kernel_size, int stride,
               int padding, Rng& rng, bool zero_init = false);

  Tensor operator()(const Tensor& x) const;
  void Collect(const std::string& prefix, StateList& out) const;

  int in_channels() const { return static_cast<int>(weight_.dim(1)); }
  int out_channels() const { return static_cast<int>(weight_.dim(0)); }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
  int stride_ = 1;
  int padding_ = 0;
};

// conv3x3 -> SiLU -> conv1x1 -> SiLU -> conv3x3. The last convolution starts
// at zero so freshly built conditioning nets emit zeros.
class ConvNet3 {
 public:
  ConvNet3() = default;
  ConvNet3(int in_channels, int hidden_channels, int out_channels, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void Collect(const std::string& prefix, StateList& out) const;

  int in_channels() const { return first_.in_channels(); }
  Conv2dModule& last() { return last_; }

 private:
  Conv2dModule first_;
  Conv2dModule middle_;
  Conv2dModule last_;
};

}  // namespace flowfid

#endif  // FLOWFID_NN_HPP_
