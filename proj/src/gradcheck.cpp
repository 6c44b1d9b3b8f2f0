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

#include "flowfid/gradcheck.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <limits>

#include "flowfid/error.hpp"

namespace flowfid {

Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& at, double h) {
  NoGradGuard no_grad;
  Tensor x = at.detach();
  auto xv = x.mutable_values();
  std::vector<double> grad(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double saved = xv[i];
    xv[i] = saved + h;
    const double up = f(x);
    xv[i] = saved - h;
    const double down = f(x);
    xv[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return Tensor(at.shape(), std::move(grad));
}

Eigen::MatrixXd FiniteDifferenceJacobian(
    const std::function<Tensor(const Tensor&)>& f, const Tensor& at, double h) {
  NoGradGuard no_grad;
  Tensor x = at.detach();
  auto xv = x.mutable_values();
  const auto cols = static_cast<Eigen::Index>(xv.size());
  Eigen::MatrixXd jac;
  for (Eigen::Index i = 0; i < cols; ++i) {
    const double saved = xv[i];
    xv[i] = saved + h;
    Tensor up = f(x);
    xv[i] = saved - h;
    Tensor down = f(x);
    xv[i] = saved;
    if (i == 0) jac.resize(up.numel(), cols);
    auto uv = up.values();
    auto dv = down.values();
    for (Eigen::Index r = 0; r < jac.rows(); ++r) {
      jac(r, i) = (uv[r] - dv[r]) / (2.0 * h);
    }
  }
  return jac;
}

double LogAbsDeterminant(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ShapeError("determinant of non-square matrix");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const auto& u = lu.matrixLU();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) sum += std::log(std::abs(u(i, i)));
  return sum;
}

double MaxRelativeError(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("MaxRelativeError: size mismatch");
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / std::max(scale, std::numeric_limits<double>::min());
}

}  // namespace flowfid
