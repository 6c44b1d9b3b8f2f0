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

#include "flowfid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "flowfid/error.hpp"

namespace flowfid {
namespace {

thread_local bool g_grad_enabled = true;

void CheckFinite(const std::vector<double>& data, const char* what) {
  for (double v : data) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value in ") + what);
    }
  }
}

}  // namespace

std::int64_t NumElements(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative extent in " + ShapeToString(shape));
    n *= d;
  }
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

std::vector<double>& Node::EnsureGrad() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor::Tensor(Shape shape, double fill) {
  node_ = std::make_shared<detail::Node>();
  node_->data.assign(static_cast<std::size_t>(NumElements(shape)), fill);
  node_->shape = std::move(shape);
  CheckFinite(node_->data, "tensor constructor");
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  if (NumElements(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + ShapeToString(shape));
  }
  CheckFinite(values, "tensor constructor");
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

Tensor Tensor::Scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::Parameter(Shape shape, std::vector<double> values) {
  Tensor t(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw Error("use of undefined tensor");
  return node_->shape;
}

std::int64_t Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " +
                     ShapeToString(s));
  }
  return s[axis];
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(node_ ? node_->data.size() : 0);
}

std::span<const double> Tensor::values() const {
  if (!node_) throw Error("use of undefined tensor");
  return node_->data;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw Error("use of undefined tensor");
  if (node_->seq != 0) throw Error("cannot mutate a non-leaf tensor");
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() on tensor of shape " + ShapeToString(shape()));
  }
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_) throw Error("use of undefined tensor");
  if (node_->seq != 0) throw Error("requires_grad can only be set on leaves");
  node_->requires_grad = on;
  return *this;
}

bool Tensor::is_leaf() const { return node_ && node_->seq == 0; }

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::backward() const {
  if (!node_) throw Error("backward on undefined tensor");
  if (node_->data.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     ShapeToString(node_->shape));
  }
  if (!node_->requires_grad) {
    throw Error("backward on a tensor that does not require grad");
  }

  // Collect interior nodes reachable from the root.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{node_.get()};
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || n->seq == 0 || !seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& in : n->inputs) stack.push_back(in.get());
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) {
              return a->seq > b->seq;
            });
  for (detail::Node* n : order) n->grad.assign(n->data.size(), 0.0);

  node_->EnsureGrad()[0] += 1.0;
  for (detail::Node* n : order) n->backward(*n);
}

Tensor Tensor::detach() const {
  if (!node_) return {};
  Tensor t;
  t.node_ = std::make_shared<detail::Node>();
  t.node_->shape = node_->shape;
  t.node_->data = node_->data;
  return t;
}

Tensor Tensor::Clone() const {
  Tensor t = detach();
  if (node_) t.node_->requires_grad = node_->requires_grad && is_leaf();
  return t;
}

Tensor Tensor::FromNode(std::shared_ptr<detail::Node> node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool GradEnabled() { return g_grad_enabled; }

}  // namespace flowfid
