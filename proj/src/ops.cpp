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

#include "flowfid/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <string>

#include "flowfid/error.hpp"

namespace flowfid {
namespace detail {
namespace {

std::atomic<std::uint64_t> g_next_seq{1};

}  // namespace

Tensor RecordOp(const char* op, Shape shape, std::vector<double> data,
                const std::vector<Tensor>& inputs,
                std::function<void(Node&)> backward) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite result in ") + op);
    }
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs_grad = false;
  if (GradEnabled()) {
    for (const auto& t : inputs) needs_grad = needs_grad || t.requires_grad();
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor::FromNode(std::move(node));
}

}  // namespace detail

namespace {

using detail::Node;
using detail::RecordOp;

std::vector<double> Copy(const Tensor& t) {
  auto v = t.values();
  return {v.begin(), v.end()};
}

void Require4d(const Tensor& a, const char* op) {
  if (a.rank() != 4) {
    throw ShapeError(std::string(op) + " expects NCHW, got " +
                     ShapeToString(a.shape()));
  }
}

// ---------------------------------------------------------------------------
// Broadcasting

struct Broadcast {
  Shape shape;
  // Empty means identity mapping.
  std::vector<std::int64_t> a_index;
  std::vector<std::int64_t> b_index;
};

std::vector<std::int64_t> BroadcastIndex(const Shape& src, const Shape& out) {
  const std::int64_t n = NumElements(out);
  std::vector<std::int64_t> index(static_cast<std::size_t>(n), 0);
  if (src.empty()) return index;
  const int rank = static_cast<int>(out.size());
  std::vector<std::int64_t> src_stride(rank, 0);
  std::int64_t stride = 1;
  for (int d = rank - 1; d >= 0; --d) {
    src_stride[d] = src[d] == 1 ? 0 : stride;
    stride *= src[d];
  }
  std::vector<std::int64_t> counter(rank, 0);
  std::int64_t offset = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    index[i] = offset;
    for (int d = rank - 1; d >= 0; --d) {
      ++counter[d];
      offset += src_stride[d];
      if (counter[d] < out[d]) break;
      offset -= src_stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return index;
}

Broadcast ResolveBroadcast(const Shape& a, const Shape& b, const char* op) {
  Broadcast bc;
  if (a == b) {
    bc.shape = a;
    return bc;
  }
  if (b.empty() || NumElements(b) == 1) {
    if (b.empty() || a.size() == b.size() || a.empty()) {
      bc.shape = a.empty() ? b : a;
      bc.b_index.assign(static_cast<std::size_t>(NumElements(bc.shape)), 0);
      if (a.empty()) {
        bc.a_index.assign(bc.b_index.size(), 0);
      }
      return bc;
    }
  }
  if (a.empty() || NumElements(a) == 1) {
    if (a.empty() || a.size() == b.size()) {
      bc.shape = b;
      bc.a_index.assign(static_cast<std::size_t>(NumElements(b)), 0);
      return bc;
    }
  }
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": cannot broadcast " +
                     ShapeToString(a) + " with " + ShapeToString(b));
  }
  bc.shape.resize(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] == b[d] || b[d] == 1) {
      bc.shape[d] = a[d];
    } else if (a[d] == 1) {
      bc.shape[d] = b[d];
    } else {
      throw ShapeError(std::string(op) + ": cannot broadcast " +
                       ShapeToString(a) + " with " + ShapeToString(b));
    }
  }
  if (bc.shape != a) bc.a_index = BroadcastIndex(a, bc.shape);
  if (bc.shape != b) bc.b_index = BroadcastIndex(b, bc.shape);
  return bc;
}

template <typename Forward, typename GradA, typename GradB>
Tensor BinaryOp(const char* name, const Tensor& a, const Tensor& b,
                Forward forward, GradA grad_a, GradB grad_b) {
  Broadcast bc = ResolveBroadcast(a.shape(), b.shape(), name);
  const std::int64_t n = NumElements(bc.shape);
  auto av = a.values();
  auto bv = b.values();
  auto ia = [&bc](std::int64_t i) {
    return bc.a_index.empty() ? i : bc.a_index[i];
  };
  auto ib = [&bc](std::int64_t i) {
    return bc.b_index.empty() ? i : bc.b_index[i];
  };
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[i] = forward(av[ia(i)], bv[ib(i)]);

  Shape shape = bc.shape;
  auto backward = [bc = std::move(bc), grad_a, grad_b](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    const auto& g = self.grad;
    const std::int64_t count = static_cast<std::int64_t>(g.size());
    if (na.requires_grad) {
      auto& ga = na.EnsureGrad();
      for (std::int64_t i = 0; i < count; ++i) {
        std::int64_t a_i = bc.a_index.empty() ? i : bc.a_index[i];
        std::int64_t b_i = bc.b_index.empty() ? i : bc.b_index[i];
        ga[a_i] += g[i] * grad_a(na.data[a_i], nb.data[b_i]);
      }
    }
    if (nb.requires_grad) {
      auto& gb = nb.EnsureGrad();
      for (std::int64_t i = 0; i < count; ++i) {
        std::int64_t a_i = bc.a_index.empty() ? i : bc.a_index[i];
        std::int64_t b_i = bc.b_index.empty() ? i : bc.b_index[i];
        gb[b_i] += g[i] * grad_b(na.data[a_i], nb.data[b_i]);
      }
    }
  };
  return RecordOp(name, std::move(shape), std::move(out), {a, b},
                  std::move(backward));
}

// `derivative(x, y)` receives the input and output values.
template <typename Forward, typename Derivative>
Tensor UnaryOp(const char* name, const Tensor& a, Forward forward,
               Derivative derivative) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = forward(av[i]);
  auto backward = [derivative](Node& self) {
    Node& in = *self.inputs[0];
    auto& gi = in.EnsureGrad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      gi[i] += self.grad[i] * derivative(in.data[i], self.data[i]);
    }
  };
  return RecordOp(name, a.shape(), std::move(out), {a}, std::move(backward));
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double StableSoftplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Index-map op: out[i] = in[index[i]].
Tensor Gather(const char* name, const Tensor& a, Shape shape,
              std::vector<std::int64_t> index) {
  auto av = a.values();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = av[index[i]];
  auto backward = [index = std::move(index)](Node& self) {
    auto& gi = self.inputs[0]->EnsureGrad();
    for (std::size_t i = 0; i < index.size(); ++i) {
      gi[index[i]] += self.grad[i];
    }
  };
  return RecordOp(name, std::move(shape), std::move(out), {a},
                  std::move(backward));
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor Add(const Tensor& a, const Tensor& b) {
  return BinaryOp(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor Sub(const Tensor& a, const Tensor& b) {
  return BinaryOp(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor Mul(const Tensor& a, const Tensor& b) {
  return BinaryOp(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor Div(const Tensor& a, const Tensor& b) {
  for (double v : b.values()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return BinaryOp(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor Neg(const Tensor& a) {
  return UnaryOp(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor Exp(const Tensor& a) {
  return UnaryOp(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor Log(const Tensor& a) {
  for (double v : a.values()) {
    if (!(v > 0.0)) {
      throw DomainError("log: non-positive input " + std::to_string(v));
    }
  }
  return UnaryOp(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor Sigmoid(const Tensor& a) {
  return UnaryOp("sigmoid", a, StableSigmoid,
                 [](double, double y) { return y * (1.0 - y); });
}

Tensor Abs(const Tensor& a) {
  return UnaryOp(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) {
        return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      });
}

Tensor Square(const Tensor& a) {
  return UnaryOp(
      "square", a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor Softplus(const Tensor& a) {
  return UnaryOp("softplus", a, StableSoftplus,
                 [](double x, double) { return StableSigmoid(x); });
}

Tensor Silu(const Tensor& a) {
  return UnaryOp(
      "silu", a, [](double x) { return x * StableSigmoid(x); },
      [](double x, double) {
        double s = StableSigmoid(x);
        return s + x * s * (1.0 - s);
      });
}

Tensor Clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw DomainError("clamp: lo > hi");
  return UnaryOp(
      "clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor Elementwise(ElementwiseOp op, const Tensor& a, const Tensor* b) {
  auto need_b = [b]() -> const Tensor& {
    if (b == nullptr || !b->defined()) {
      throw Error("binary elementwise op without second operand");
    }
    return *b;
  };
  switch (op) {
    case ElementwiseOp::kAdd:
      return Add(a, need_b());
    case ElementwiseOp::kSub:
      return Sub(a, need_b());
    case ElementwiseOp::kMul:
      return Mul(a, need_b());
    case ElementwiseOp::kDiv:
      return Div(a, need_b());
    case ElementwiseOp::kNeg:
      return Neg(a);
    case ElementwiseOp::kExp:
      return Exp(a);
    case ElementwiseOp::kLog:
      return Log(a);
    case ElementwiseOp::kSigmoid:
      return Sigmoid(a);
    case ElementwiseOp::kAbs:
      return Abs(a);
    case ElementwiseOp::kSquare:
      return Square(a);
    case ElementwiseOp::kSoftplus:
      return Softplus(a);
    case ElementwiseOp::kSilu:
      return Silu(a);
  }
  throw Error("unknown elementwise op");
}

Tensor operator+(const Tensor& a, const Tensor& b) { return Add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return Sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return Mul(a, b); }
Tensor operator/(const Tensor& a, const Tensor& b) { return Div(a, b); }
Tensor operator-(const Tensor& a) { return Neg(a); }
Tensor operator+(const Tensor& a, double b) { return Add(a, Tensor::Scalar(b)); }
Tensor operator+(double a, const Tensor& b) { return Add(Tensor::Scalar(a), b); }
Tensor operator-(const Tensor& a, double b) { return Sub(a, Tensor::Scalar(b)); }
Tensor operator-(double a, const Tensor& b) { return Sub(Tensor::Scalar(a), b); }
Tensor operator*(const Tensor& a, double b) { return Mul(a, Tensor::Scalar(b)); }
Tensor operator*(double a, const Tensor& b) { return Mul(Tensor::Scalar(a), b); }
Tensor operator/(const Tensor& a, double b) { return Div(a, Tensor::Scalar(b)); }
Tensor operator/(double a, const Tensor& b) { return Div(Tensor::Scalar(a), b); }

// ---------------------------------------------------------------------------
// Reductions

Tensor Reduce(ReduceOp op, const Tensor& a, std::vector<int> axes,
              bool keepdim) {
  const Shape& in = a.shape();
  const int rank = a.rank();
  std::vector<bool> reduced(rank, axes.empty());
  for (int axis : axes) {
    int ax = axis < 0 ? axis + rank : axis;
    if (ax < 0 || ax >= rank) {
      throw ShapeError("reduce: axis " + std::to_string(axis) +
                       " invalid for " + ShapeToString(in));
    }
    if (reduced[ax]) throw ShapeError("reduce: repeated axis");
    reduced[ax] = true;
  }
  Shape kept(rank);
  Shape out_shape;
  std::int64_t group = 1;
  for (int d = 0; d < rank; ++d) {
    kept[d] = reduced[d] ? 1 : in[d];
    if (reduced[d]) group *= in[d];
    if (!reduced[d]) {
      out_shape.push_back(in[d]);
    } else if (keepdim) {
      out_shape.push_back(1);
    }
  }
  std::vector<std::int64_t> index = BroadcastIndex(kept, in);
  std::vector<double> out(static_cast<std::size_t>(NumElements(kept)), 0.0);
  auto av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) out[index[i]] += av[i];
  const double scale =
      op == ReduceOp::kMean ? 1.0 / static_cast<double>(group) : 1.0;
  if (op == ReduceOp::kMean) {
    for (double& v : out) v *= scale;
  }
  auto backward = [index = std::move(index), scale](Node& self) {
    auto& gi = self.inputs[0]->EnsureGrad();
    for (std::size_t i = 0; i < index.size(); ++i) {
      gi[i] += self.grad[index[i]] * scale;
    }
  };
  return RecordOp(op == ReduceOp::kSum ? "sum" : "mean", std::move(out_shape),
                  std::move(out), {a}, std::move(backward));
}

Tensor Sum(const Tensor& a) { return Reduce(ReduceOp::kSum, a); }
Tensor Mean(const Tensor& a) { return Reduce(ReduceOp::kMean, a); }
Tensor Sum(const Tensor& a, std::vector<int> axes, bool keepdim) {
  return Reduce(ReduceOp::kSum, a, std::move(axes), keepdim);
}
Tensor Mean(const Tensor& a, std::vector<int> axes, bool keepdim) {
  return Reduce(ReduceOp::kMean, a, std::move(axes), keepdim);
}

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor Reshape(const Tensor& a, Shape shape) {
  if (NumElements(shape) != a.numel()) {
    throw ShapeError("reshape " + ShapeToString(a.shape()) + " -> " +
                     ShapeToString(shape));
  }
  auto backward = [](Node& self) {
    auto& gi = self.inputs[0]->EnsureGrad();
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += self.grad[i];
  };
  return RecordOp("reshape", std::move(shape), Copy(a), {a},
                  std::move(backward));
}

Tensor SliceChannels(const Tensor& a, std::int64_t begin, std::int64_t end) {
  Require4d(a, "slice_channels");
  const auto n = a.dim(0), c = a.dim(1), hw = a.dim(2) * a.dim(3);
  if (begin < 0 || end > c || begin >= end) {
    throw ShapeError("slice_channels [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") of " + ShapeToString(a.shape()));
  }
  const auto oc = end - begin;
  std::vector<std::int64_t> index;
  index.reserve(static_cast<std::size_t>(n * oc * hw));
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = begin; ch < end; ++ch) {
      for (std::int64_t p = 0; p < hw; ++p) index.push_back((b * c + ch) * hw + p);
    }
  }
  return Gather("slice_channels", a, {n, oc, a.dim(2), a.dim(3)},
                std::move(index));
}

Tensor SliceBatch(const Tensor& a, std::int64_t begin, std::int64_t end) {
  if (a.rank() < 1 || begin < 0 || end > a.dim(0) || begin >= end) {
    throw ShapeError("slice_batch out of range for " + ShapeToString(a.shape()));
  }
  const std::int64_t item = a.numel() / a.dim(0);
  std::vector<std::int64_t> index(static_cast<std::size_t>((end - begin) * item));
  std::iota(index.begin(), index.end(), begin * item);
  Shape shape = a.shape();
  shape[0] = end - begin;
  return Gather("slice_batch", a, std::move(shape), std::move(index));
}

namespace {

// Concatenation along axis 0 (batch) or 1 (channels) of rank-4 tensors.
Tensor ConcatAxis(const std::vector<Tensor>& parts, int axis, const char* name) {
  if (parts.empty()) throw ShapeError(std::string(name) + ": no inputs");
  Shape shape = parts[0].shape();
  if (shape.empty()) throw ShapeError(std::string(name) + ": rank-0 input");
  std::int64_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != shape.size()) {
      throw ShapeError(std::string(name) + ": rank mismatch");
    }
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (static_cast<int>(d) != axis && s[d] != shape[d]) {
        throw ShapeError(std::string(name) + ": extent mismatch " +
                         ShapeToString(s) + " vs " + ShapeToString(shape));
      }
    }
    total += s[axis];
  }
  shape[axis] = total;
  // outer = product of extents before axis, inner = after axis.
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];

  std::vector<double> out(static_cast<std::size_t>(NumElements(shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::int64_t block = p.shape()[axis] * inner;
    auto pv = p.values();
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy(pv.begin() + o * block, pv.begin() + (o + 1) * block,
                out.begin() + o * total * inner + offset * inner);
    }
    offset += p.shape()[axis];
  }
  std::vector<std::int64_t> extents;
  for (const auto& p : parts) extents.push_back(p.shape()[axis]);
  auto backward = [offsets = std::move(offsets), extents = std::move(extents),
                   outer, inner, total](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Node& in = *self.inputs[k];
      if (!in.requires_grad) continue;
      auto& gi = in.EnsureGrad();
      const std::int64_t block = extents[k] * inner;
      for (std::int64_t o = 0; o < outer; ++o) {
        const double* src = self.grad.data() + o * total * inner + offsets[k] * inner;
        double* dst = gi.data() + o * block;
        for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    }
  };
  return RecordOp(name, std::move(shape), std::move(out), parts,
                  std::move(backward));
}

}  // namespace

Tensor ConcatChannels(const std::vector<Tensor>& parts) {
  for (const auto& p : parts) Require4d(p, "concat_channels");
  return ConcatAxis(parts, 1, "concat_channels");
}

Tensor ConcatBatch(const std::vector<Tensor>& parts) {
  return ConcatAxis(parts, 0, "concat_batch");
}

Tensor SpaceToDepth(const Tensor& a, int factor) {
  Require4d(a, "space_to_depth");
  const auto n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  if (factor < 1 || h % factor != 0 || w % factor != 0) {
    throw ShapeError("space_to_depth: extents of " + ShapeToString(a.shape()) +
                     " not divisible by " + std::to_string(factor));
  }
  const std::int64_t r = factor, oh = h / r, ow = w / r, oc = c * r * r;
  std::vector<std::int64_t> index(static_cast<std::size_t>(a.numel()));
  std::size_t k = 0;
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t dy = 0; dy < r; ++dy)
        for (std::int64_t dx = 0; dx < r; ++dx)
          for (std::int64_t i = 0; i < oh; ++i)
            for (std::int64_t j = 0; j < ow; ++j)
              index[k++] = ((b * c + ch) * h + i * r + dy) * w + j * r + dx;
  return Gather("space_to_depth", a, {n, oc, oh, ow}, std::move(index));
}

Tensor DepthToSpace(const Tensor& a, int factor) {
  Require4d(a, "depth_to_space");
  const auto n = a.dim(0), oc = a.dim(1), oh = a.dim(2), ow = a.dim(3);
  const std::int64_t r = factor;
  if (factor < 1 || oc % (r * r) != 0) {
    throw ShapeError("depth_to_space: channels of " + ShapeToString(a.shape()) +
                     " not divisible by " + std::to_string(r * r));
  }
  const std::int64_t c = oc / (r * r), h = oh * r, w = ow * r;
  std::vector<std::int64_t> index(static_cast<std::size_t>(a.numel()));
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
          const std::int64_t src_c = ch * r * r + (y % r) * r + (x % r);
          index[((b * c + ch) * h + y) * w + x] =
              ((b * oc + src_c) * oh + y / r) * ow + x / r;
        }
  return Gather("depth_to_space", a, {n, c, h, w}, std::move(index));
}

Tensor UpsampleNearest(const Tensor& a, int factor) {
  Require4d(a, "upsample_nearest");
  if (factor < 1) throw ShapeError("upsample_nearest: factor < 1");
  return ResizeNearest(a, a.dim(2) * factor, a.dim(3) * factor);
}

Tensor ResizeNearest(const Tensor& a, std::int64_t out_h, std::int64_t out_w) {
  Require4d(a, "resize_nearest");
  const auto n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  if (out_h < 1 || out_w < 1) throw ShapeError("resize_nearest: empty output");
  std::vector<std::int64_t> index(static_cast<std::size_t>(n * c * out_h * out_w));
  std::size_t k = 0;
  for (std::int64_t p = 0; p < n * c; ++p)
    for (std::int64_t i = 0; i < out_h; ++i)
      for (std::int64_t j = 0; j < out_w; ++j)
        index[k++] = (p * h + i * h / out_h) * w + j * w / out_w;
  return Gather("resize_nearest", a, {n, c, out_h, out_w}, std::move(index));
}

Tensor AvgPool(const Tensor& a, int factor) {
  Require4d(a, "avg_pool");
  const auto n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  const std::int64_t r = factor;
  if (r < 1 || h % r != 0 || w % r != 0) {
    throw ShapeError("avg_pool: extents of " + ShapeToString(a.shape()) +
                     " not divisible by " + std::to_string(factor));
  }
  const std::int64_t oh = h / r, ow = w / r;
  const double inv = 1.0 / static_cast<double>(r * r);
  auto av = a.values();
  std::vector<double> out(static_cast<std::size_t>(n * c * oh * ow), 0.0);
  for (std::int64_t p = 0; p < n * c; ++p)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        out[(p * oh + y / r) * ow + x / r] += av[(p * h + y) * w + x] * inv;
  auto backward = [n, c, h, w, r, oh, ow, inv](Node& self) {
    auto& gi = self.inputs[0]->EnsureGrad();
    for (std::int64_t p = 0; p < n * c; ++p)
      for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x)
          gi[(p * h + y) * w + x] += self.grad[(p * oh + y / r) * ow + x / r] * inv;
  };
  return RecordOp("avg_pool", {n, c, oh, ow}, std::move(out), {a},
                  std::move(backward));
}

Tensor Linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1)) {
    throw ShapeError("linear: x " + ShapeToString(x.shape()) + " weight " +
                     ShapeToString(weight.shape()));
  }
  const auto n = x.dim(0), f = x.dim(1), o = weight.dim(0);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != o)) {
    throw ShapeError("linear: bias " + ShapeToString(bias.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(n * o));
  Eigen::Map<const RowMat> xm(x.values().data(), n, f);
  Eigen::Map<const RowMat> wm(weight.values().data(), o, f);
  Eigen::Map<RowMat> om(out.data(), n, o);
  om.noalias() = xm * wm.transpose();
  if (bias.defined()) {
    auto bv = bias.values();
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < o; ++j) out[i * o + j] += bv[j];
  }
  auto backward = [n, f, o](Node& self) {
    Eigen::Map<const RowMat> g(self.grad.data(), n, o);
    Node& nx = *self.inputs[0];
    Node& nw = *self.inputs[1];
    if (nx.requires_grad) {
      Eigen::Map<RowMat> gx(nx.EnsureGrad().data(), n, f);
      Eigen::Map<const RowMat> wm(nw.data.data(), o, f);
      gx.noalias() += g * wm;
    }
    if (nw.requires_grad) {
      Eigen::Map<RowMat> gw(nw.EnsureGrad().data(), o, f);
      Eigen::Map<const RowMat> xm(nx.data.data(), n, f);
      gw.noalias() += g.transpose() * xm;
    }
    if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
      auto& gb = self.inputs[2]->EnsureGrad();
      for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < o; ++j) gb[j] += self.grad[i * o + j];
    }
  };
  std::vector<Tensor> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return RecordOp("linear", {n, o}, std::move(out), inputs, std::move(backward));
}

}  // namespace flowfid
