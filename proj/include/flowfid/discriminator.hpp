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

#ifndef FLOWFID_DISCRIMINATOR_HPP_
#define FLOWFID_DISCRIMINATOR_HPP_

#include <string>
#include <vector>

#include "flowfid/nn.hpp"

namespace flowfid {

struct DiscriminatorConfig {
  int in_channels = 3;
  int width = 16;
  // HR patch size the discriminator accepts.
  int image_size = 32;

  void Validate() const;
};

// Four stride-2 3x3 conv blocks (widths w, w, 2w, 2w), global average pooling
// and a linear head producing one logit per image.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, Rng& rng);

  const DiscriminatorConfig& config() const { return config_; }

  Tensor Logits(const Tensor& images) const;  // (N)
  Tensor Discriminate(const Tensor& images) const;  // sigmoid(logits)

  void Collect(const std::string& prefix, StateList& out) const;

 private:
  DiscriminatorConfig config_;
  std::vector<Conv2dModule> convs_;
  Tensor head_weight_;
  Tensor head_bias_;
};

enum class AdversarialForm { kPlain, kRelativistic };

std::string AdversarialFormName(AdversarialForm form);
AdversarialForm ParseAdversarialForm(const std::string& name);

struct AdversarialLosses {
  // L_adv = E log(1 - d(fake)) + E log d(real). The generator minimizes it
  // (gen_loss == l_adv), the discriminator minimizes disc_objective = -l_adv.
  Tensor l_adv;
  Tensor gen_loss;
  Tensor disc_objective;
  double real_probability = 0.0;  // batch means, for logging
  double fake_probability = 0.0;
};

// The relativistic form replaces d(real) with sigmoid(C(real) - mean C(fake))
// and d(fake) with sigmoid(C(fake) - mean C(real)).
AdversarialLosses AdversarialLossesFromLogits(const Tensor& real_logits,
                                              const Tensor& fake_logits,
                                              AdversarialForm form);
AdversarialLosses ComputeAdversarialLosses(const Tensor& real,
                                           const Tensor& fake,
                                           const Discriminator& d,
                                           AdversarialForm form);

}  // namespace flowfid

#endif  // FLOWFID_DISCRIMINATOR_HPP_
