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

#include "flowfid/discriminator.hpp"

#include <cmath>

#include "flowfid/error.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {

void DiscriminatorConfig::Validate() const {
  if (in_channels < 1 || width < 1) {
    throw ConfigError("discriminator channels must be >= 1");
  }
  if (image_size < 16 || image_size % 16 != 0) {
    throw ConfigError("discriminator image size must be a multiple of 16");
  }
}

Discriminator::Discriminator(const DiscriminatorConfig& config, Rng& rng)
    : config_(config) {
  config_.Validate();
  const int w = config_.width;
  const int widths[4] = {w, w, 2 * w, 2 * w};
  int in = config_.in_channels;
  for (int out : widths) {
    convs_.emplace_back(in, out, 3, 2, 1, rng);
    in = out;
  }
  head_weight_ = Tensor::Parameter({1, in}, std::vector<double>(in, 0.0));
  head_bias_ = Tensor::Parameter({1}, {0.0});
}

Tensor Discriminator::Logits(const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != config_.in_channels ||
      images.dim(2) != config_.image_size ||
      images.dim(3) != config_.image_size) {
    throw ShapeError("discriminator expects (N," +
                     std::to_string(config_.in_channels) + "," +
                     std::to_string(config_.image_size) + "," +
                     std::to_string(config_.image_size) + "), got " +
                     ShapeToString(images.shape()));
  }
  Tensor h = images;
  for (const auto& conv : convs_) h = Silu(conv(h));
  Tensor pooled = Mean(h, {2, 3});
  return Reshape(Linear(pooled, head_weight_, head_bias_), {images.dim(0)});
}

Tensor Discriminator::Discriminate(const Tensor& images) const {
  return Sigmoid(Logits(images));
}

void Discriminator::Collect(const std::string& prefix, StateList& out) const {
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    convs_[i].Collect(prefix + ".conv" + std::to_string(i), out);
  }
  out.push_back({prefix + ".head.weight", head_weight_, true});
  out.push_back({prefix + ".head.bias", head_bias_, true});
}

std::string AdversarialFormName(AdversarialForm form) {
  return form == AdversarialForm::kPlain ? "plain" : "relativistic";
}

AdversarialForm ParseAdversarialForm(const std::string& name) {
  if (name == "plain") return AdversarialForm::kPlain;
  if (name == "relativistic") return AdversarialForm::kRelativistic;
  throw ConfigError("unknown adversarial form '" + name +
                    "' (expected plain|relativistic)");
}

AdversarialLosses AdversarialLossesFromLogits(const Tensor& real_logits,
                                              const Tensor& fake_logits,
                                              AdversarialForm form) {
  Tensor real_term = real_logits;
  Tensor fake_term = fake_logits;
  if (form == AdversarialForm::kRelativistic) {
    real_term = real_logits - Mean(fake_logits);
    fake_term = fake_logits - Mean(real_logits);
  }
  // log sigmoid(u) = -softplus(-u); log(1 - sigmoid(u)) = -softplus(u).
  Tensor log_real = Neg(Softplus(Neg(real_term)));
  Tensor log_one_minus_fake = Neg(Softplus(fake_term));
  AdversarialLosses out;
  out.l_adv = Mean(log_one_minus_fake) + Mean(log_real);
  out.gen_loss = out.l_adv;
  out.disc_objective = Neg(out.l_adv);
  double rp = 0.0, fp = 0.0;
  for (double v : real_term.values()) rp += 1.0 / (1.0 + std::exp(-v));
  for (double v : fake_term.values()) fp += 1.0 / (1.0 + std::exp(-v));
  out.real_probability = rp / static_cast<double>(real_term.numel());
  out.fake_probability = fp / static_cast<double>(fake_term.numel());
  return out;
}

AdversarialLosses ComputeAdversarialLosses(const Tensor& real,
                                           const Tensor& fake,
                                           const Discriminator& d,
                                           AdversarialForm form) {
  return AdversarialLossesFromLogits(d.Logits(real), d.Logits(fake), form);
}

}  // namespace flowfid
