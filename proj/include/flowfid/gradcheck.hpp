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

#ifndef FLOWFID_GRADCHECK_HPP_
#define FLOWFID_GRADCHECK_HPP_

#include <Eigen/Core>
#include <functional>
#include <span>

#include "flowfid/tensor.hpp"

namespace flowfid {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every entry of
// `at`. `f` must be deterministic. Runs with grad recording disabled.
Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& at, double h = 1e-5);

// Central-difference Jacobian of a tensor-valued map; rows index outputs,
// columns index entries of `at`.
Eigen::MatrixXd FiniteDifferenceJacobian(
    const std::function<Tensor(const Tensor&)>& f, const Tensor& at,
    double h = 1e-5);

double LogAbsDeterminant(const Eigen::MatrixXd& m);

// max|a - b| / max(max|b|, tiny): norm-wise relative error of a block.
double MaxRelativeError(std::span<const double> a, std::span<const double> b);

}  // namespace flowfid

#endif  // FLOWFID_GRADCHECK_HPP_
