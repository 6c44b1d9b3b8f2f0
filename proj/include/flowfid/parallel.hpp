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

#ifndef FLOWFID_PARALLEL_HPP_
#define FLOWFID_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace flowfid {

// Worker count: FLOWFID_THREADS when set to a positive integer, otherwise
// the hardware concurrency (at least 1).
int ThreadBudget();

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be
// independent; results should be written to per-index slots so the outcome
// does not depend on scheduling. The first exception is rethrown.
void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t)>& fn);

}  // namespace flowfid

#endif  // FLOWFID_PARALLEL_HPP_
