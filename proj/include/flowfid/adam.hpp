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

#ifndef FLOWFID_ADAM_HPP_
#define FLOWFID_ADAM_HPP_

#include <span>
#include <vector>

#include "flowfid/nn.hpp"

namespace flowfid {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of a single block; `step` is the 1-based
// index of this update.
void AdamStep(std::span<double> params, std::span<const double> grads,
              std::span<double> m, std::span<double> v, std::int64_t step,
              const AdamHyper& hyper);

// Moments for every block of a parameter list, in list order.
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

class Adam {
 public:
  Adam() = default;
  explicit Adam(StateList params);

  const StateList& params() const { return params_; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }

  // Applies one update from the accumulated grads; blocks without a grad
  // are treated as zero-gradient.
  void Step(double lr);
  void ZeroGrad() const;

 private:
  StateList params_;
  AdamState state_;
};

}  // namespace flowfid

#endif  // FLOWFID_ADAM_HPP_
