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

#include "flowfid/adam.hpp"

#include <cmath>

#include "flowfid/error.hpp"

namespace flowfid {

void AdamStep(std::span<double> params, std::span<const double> grads,
              std::span<double> m, std::span<double> v, std::int64_t step,
              const AdamHyper& h) {
  if (grads.size() != params.size() || m.size() != params.size() ||
      v.size() != params.size()) {
    throw ShapeError("adam: parameter, gradient and moment sizes differ");
  }
  if (step < 1) throw DomainError("adam: step index must be >= 1");
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * grads[i];
    v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
  }
}

Adam::Adam(StateList params) : params_(TrainableOnly(params)) {
  for (const auto& p : params_) {
    state_.m.emplace_back(p.tensor.numel(), 0.0);
    state_.v.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::Step(double lr) {
  ++state_.step;
  AdamHyper hyper;
  hyper.lr = lr;
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].tensor;
    auto g = t.grad();
    if (g.empty()) {
      zeros.assign(t.numel(), 0.0);
      g = zeros;
    }
    AdamStep(t.mutable_values(), g, state_.m[i], state_.v[i], state_.step, hyper);
  }
}

void Adam::ZeroGrad() const { flowfid::ZeroGrad(params_); }

}  // namespace flowfid
