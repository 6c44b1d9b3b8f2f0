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

#ifndef FLOWFID_VERIFY_HPP_
#define FLOWFID_VERIFY_HPP_

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "flowfid/flow_network.hpp"
#include "flowfid/nn.hpp"

// Numerical property checks shared by `flowfid verify` and the test suite.
// Each measurement compares the implementation against an independent
// oracle (finite differences, dense determinants, direct statistics).
namespace flowfid {

// Perturbs every trainable block by N(0, scale^2) (ActNorm scales are kept
// away from zero), so zero-initialized layers take part in checks. ActNorm
// layers are marked initialized, or reset to initialize on the next batch.
void RandomizeParameters(const StateList& state, Rng& rng, double scale = 0.1,
                         bool mark_initialized = true);

// Random conditioning for `flow` on an input of shape y_shape.
LrEmbedding RandomEmbedding(const FlowNetwork& flow, const Shape& y_shape,
                            int channels, Rng& rng);

// max |decode(encode(y)) - y| over `inputs` random images (one batch), with
// parameters perturbed by N(0, param_scale^2).
double RoundTripError(const FlowConfig& config, int inputs, std::uint64_t seed,
                      int height = 8, int width = 8, double param_scale = 0.1);

struct LogdetComparison {
  std::string layer;
  double analytic = 0.0;
  double numeric = 0.0;
  // |analytic - numeric| / max(|numeric|, 1).
  double error = 0.0;
};

// Every layer kind on a small random instance (total dim <= 64), plus a
// full 1-level / 2-step flow ("flow").
std::vector<LogdetComparison> LogdetOracle(std::uint64_t seed);

struct BlockGradError {
  std::string block;  // "<network>/<parameter path>"
  double error = 0.0;
  std::int64_t entries = 0;
};

// Autodiff vs central differences (h = 1e-5) for every trainable block of
// the flow SR model, the Laplace SR model, the discriminator and the
// adversarial loss w.r.t. fake pixels.
std::vector<BlockGradError> GradientSuite(std::uint64_t seed);

struct L1EquivalenceResult {
  double flow_vs_laplace = 0.0;  // |one_layer_flow_nll - laplace_nll|
  // |laplace_nll(b=1) - l1 - D log 2|, reported as 0 when within the
  // rounding of the final additions (4 ulp of the NLL).
  double constant_gap = 0.0;
};
L1EquivalenceResult L1Equivalence(std::uint64_t seed);

struct ActNormStats {
  double max_abs_mean = 0.0;
  double max_abs_std_dev = 0.0;  // max |sigma - 1|
};
ActNormStats ActNormInitStats(std::uint64_t seed, int channels = 6);

struct OrthoMixStats {
  double orthonormality = 0.0;  // ||Q^T Q - I||_inf
  double max_abs_logdet = 0.0;
};
OrthoMixStats OrthoMixCheck(std::uint64_t seed, int channels);

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<std::string> VerifySuiteNames();
// Runs the named suites (all when empty), logging one line per suite.
std::vector<SuiteResult> RunVerification(const std::vector<std::string>& only,
                                         std::ostream* log);

}  // namespace flowfid

#endif  // FLOWFID_VERIFY_HPP_
