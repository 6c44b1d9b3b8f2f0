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

#ifndef FLOWFID_LAPLACE_HPP_
#define FLOWFID_LAPLACE_HPP_

#include "flowfid/tensor.hpp"

// The L1 family: plain L1, the Laplace NLL with per-pixel scale, and the
// same NLL evaluated as a one-layer conditional flow.
namespace flowfid {

// Predicted Laplace mean and log-scale; b = exp(a) > 0 by construction.
struct LaplaceHead {
  Tensor g;
  Tensor a;

  Tensor b() const;
};

// sum |y - g|.
Tensor L1Loss(const Tensor& y, const Tensor& g);

// sum |y - g| / b + sum log b + D log 2, the full NLL of L(y; g, b) with D the
// element count. Throws DomainError unless b > 0.
Tensor LaplaceNll(const Tensor& y, const Tensor& g, const Tensor& b);

// Same NLL parametrized by log-scale a = log b.
Tensor LaplaceNllLogScale(const Tensor& y, const Tensor& g, const Tensor& a);

// Encodes y with the single layer z = (y - g) / b under a standard Laplace
// prior and returns the total NLL (summed over the batch) from the generic
// flow machinery.
Tensor OneLayerFlowNll(const Tensor& y, const LaplaceHead& head);

// Splits an encoder output with 2C channels into (g, a).
LaplaceHead AdaptiveVarianceHead(const Tensor& encoder_output);

}  // namespace flowfid

#endif  // FLOWFID_LAPLACE_HPP_
