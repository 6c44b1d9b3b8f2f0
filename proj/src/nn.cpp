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

#include "flowfid/nn.hpp"

#include <cmath>

#include "flowfid/ops.hpp"

namespace flowfid {

StateList TrainableOnly(const StateList& state) {
  StateList out;
  for (const auto& s : state) {
    if (s.trainable) out.push_back(s);
  }
  return out;
}

void ZeroGrad(const StateList& state) {
  for (auto s : state) s.tensor.zero_grad();
}

std::int64_t CountParameters(const StateList& state) {
  std::int64_t n = 0;
  for (const auto& s : state) {
    if (s.trainable) n += s.tensor.numel();
  }
  return n;
}

Conv2dModule::Conv2dModule(int in_channels, int out_channels, int kernel_size,
                           int stride, int padding, Rng& rng, bool zero_init)
    : stride_(stride), padding_(padding) {
  Shape wshape{out_channels, in_channels, kernel_size, kernel_size};
  std::vector<double> w(static_cast<std::size_t>(NumElements(wshape)), 0.0);
  if (!zero_init) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(
                                   in_channels * kernel_size * kernel_size));
    for (double& v : w) v = rng.Uniform(-bound, bound);
  }
  weight_ = Tensor::Parameter(std::move(wshape), std::move(w));
  bias_ = Tensor::Parameter({out_channels},
                            std::vector<double>(out_channels, 0.0));
}

Tensor Conv2dModule::operator()(const Tensor& x) const {
  return Conv2d(x, weight_, bias_, stride_, padding_);
}

void Conv2dModule::Collect(const std::string& prefix, StateList& out) const {
  out.push_back({prefix + ".weight", weight_, true});
  out.push_back({prefix + ".bias", bias_, true});
}

ConvNet3::ConvNet3(int in_channels, int hidden_channels, int out_channels,
                   Rng& rng)
    : first_(in_channels, hidden_channels, 3, 1, 1, rng),
      middle_(hidden_channels, hidden_channels, 1, 1, 0, rng),
      last_(hidden_channels, out_channels, 3, 1, 1, rng, /*zero_init=*/true) {}

Tensor ConvNet3::operator()(const Tensor& x) const {
  return last_(Silu(middle_(Silu(first_(x)))));
}

void ConvNet3::Collect(const std::string& prefix, StateList& out) const {
  first_.Collect(prefix + ".conv0", out);
  middle_.Collect(prefix + ".conv1", out);
  last_.Collect(prefix + ".conv2", out);
}

}  // namespace flowfid
