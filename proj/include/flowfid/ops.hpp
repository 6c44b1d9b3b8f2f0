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

#ifndef FLOWFID_OPS_HPP_
#define FLOWFID_OPS_HPP_

#include <vector>

#include "flowfid/tensor.hpp"

// Differentiable operations. Every op records itself on the graph when grad
// mode is enabled and at least one input requires grad. Outputs are checked
// for NaN/Inf and domain violations raise DomainError instead of producing
// them.
namespace flowfid {

enum class ElementwiseOp {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kSigmoid,
  kAbs,
  kSquare,
  kSoftplus,
  kSilu,
};

// Unary kinds ignore `b`. Binary kinds broadcast: operands of equal rank
// whose extents match or are 1, or a rank-0 scalar against anything.
Tensor Elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b = nullptr);

Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b);

Tensor Neg(const Tensor& a);
Tensor Exp(const Tensor& a);
Tensor Log(const Tensor& a);
Tensor Sigmoid(const Tensor& a);
// Subgradient sign(0) = 0.
Tensor Abs(const Tensor& a);
Tensor Square(const Tensor& a);
// log(1 + e^x), evaluated without overflow.
Tensor Softplus(const Tensor& a);
// x * sigmoid(x).
Tensor Silu(const Tensor& a);
// Gradient is 1 on [lo, hi] and 0 outside.
Tensor Clamp(const Tensor& a, double lo, double hi);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator/(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, double b);
Tensor operator+(double a, const Tensor& b);
Tensor operator-(const Tensor& a, double b);
Tensor operator-(double a, const Tensor& b);
Tensor operator*(const Tensor& a, double b);
Tensor operator*(double a, const Tensor& b);
Tensor operator/(const Tensor& a, double b);
Tensor operator/(double a, const Tensor& b);

enum class ReduceOp { kSum, kMean };

// Reduces over `axes` (all axes when empty); reduced axes are dropped unless
// keepdim is set.
Tensor Reduce(ReduceOp op, const Tensor& a, std::vector<int> axes = {},
              bool keepdim = false);
Tensor Sum(const Tensor& a);
Tensor Mean(const Tensor& a);
Tensor Sum(const Tensor& a, std::vector<int> axes, bool keepdim = false);
Tensor Mean(const Tensor& a, std::vector<int> axes, bool keepdim = false);

Tensor Reshape(const Tensor& a, Shape shape);

// NCHW helpers.
Tensor SliceChannels(const Tensor& a, std::int64_t begin, std::int64_t end);
Tensor ConcatChannels(const std::vector<Tensor>& parts);
Tensor SliceBatch(const Tensor& a, std::int64_t begin, std::int64_t end);
Tensor ConcatBatch(const std::vector<Tensor>& parts);

// (N,C,H,W) -> (N,C*r*r,H/r,W/r); output channel c*r*r + dy*r + dx holds
// input pixel (r*i + dy, r*j + dx) of channel c.
Tensor SpaceToDepth(const Tensor& a, int factor);
Tensor DepthToSpace(const Tensor& a, int factor);

Tensor UpsampleNearest(const Tensor& a, int factor);
Tensor AvgPool(const Tensor& a, int factor);
// Arbitrary-ratio nearest resize: output (i, j) reads floor(i*H/oh).
Tensor ResizeNearest(const Tensor& a, std::int64_t out_h, std::int64_t out_w);

// Cross-correlation. input (N,Cin,H,W), kernel (Cout,Cin,kh,kw), bias (Cout)
// or undefined; zero padding of `padding` on every side.
Tensor Conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride = 1, int padding = 0);

// x (N,F), weight (O,F), bias (O) or undefined -> (N,O).
Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

namespace detail {

// Shared constructor for op results; see ops.cpp.
Tensor RecordOp(const char* op, Shape shape, std::vector<double> data,
                const std::vector<Tensor>& inputs,
                std::function<void(Node&)> backward);

}  // namespace detail
}  // namespace flowfid

#endif  // FLOWFID_OPS_HPP_
