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

#ifndef FLOWFID_FLOW_LAYERS_HPP_
#define FLOWFID_FLOW_LAYERS_HPP_

#include <Eigen/Core>
#include <string>

#include "flowfid/nn.hpp"
#include "flowfid/random.hpp"
#include "flowfid/tensor.hpp"

namespace flowfid {

// Activation flowing through the pyramid plus the running per-item
// log-determinant (shape (N), nats).
struct LayerIO {
  Tensor activation;
  Tensor logdet;
};

// Scale/bias of an affine coupling. The scale is reparametrized as
// s = 1 / sigmoid(s_tilde) = 1 + exp(-s_tilde), so s > 1 always and
// log s = softplus(-s_tilde) stays finite for finite s_tilde.
struct CouplingParams {
  Tensor s_tilde;  // after clamping
  Tensor s;
  Tensor log_s;
  Tensor t;
};

inline constexpr double kDefaultScaleClamp = 15.0;

CouplingParams MakeCouplingParams(const Tensor& raw_s_tilde, const Tensor& t,
                                  double clamp = kDefaultScaleClamp);

// One invertible map with an exact inverse and a tractable log-determinant.
// Forward is the encode direction (y -> z) and adds its log|det J| to the
// running logdet; Inverse undoes the map and subtracts the same amount.
class InvertibleLayer {
 public:
  virtual ~InvertibleLayer() = default;

  virtual std::string kind() const = 0;
  virtual LayerIO Forward(const LayerIO& in, const Tensor& cond) = 0;
  virtual LayerIO Inverse(const LayerIO& in, const Tensor& cond) = 0;
  virtual Shape OutputShape(const Shape& in) const { return in; }
  virtual Shape InputShape(const Shape& out) const { return out; }
  virtual void Collect(const std::string& /*prefix*/, StateList& /*out*/) const {}
};

// out = scale * h + bias per channel. The first Forward on an uninitialized
// layer sets scale/bias so that batch has zero mean and unit variance per
// channel.
class ActNorm : public InvertibleLayer {
 public:
  explicit ActNorm(int channels);

  std::string kind() const override { return "actnorm"; }
  LayerIO Forward(const LayerIO& in, const Tensor& cond) override;
  LayerIO Inverse(const LayerIO& in, const Tensor& cond) override;
  void Collect(const std::string& prefix, StateList& out) const override;

  void InitializeFrom(const Tensor& h);
  bool initialized() const { return initialized_.at(0) != 0.0; }
  Tensor& scale() { return scale_; }
  Tensor& bias() { return bias_; }

 private:
  Tensor LogdetPerItem(const Tensor& h) const;

  Tensor scale_;  // (1,C,1,1)
  Tensor bias_;   // (1,C,1,1)
  Tensor initialized_;
};

// Per-pixel channel mixing h' = Q h with a fixed orthonormal Q.
class OrthoMix : public InvertibleLayer {
 public:
  // Q drawn uniformly from the orthogonal group.
  OrthoMix(int channels, Rng& rng);
  // Explicit Q; must be square and orthonormal to 1e-10.
  explicit OrthoMix(const Eigen::MatrixXd& q);

  std::string kind() const override { return "orthomix"; }
  LayerIO Forward(const LayerIO& in, const Tensor& cond) override;
  LayerIO Inverse(const LayerIO& in, const Tensor& cond) override;
  void Collect(const std::string& prefix, StateList& out) const override;

  Eigen::MatrixXd matrix() const;

  // QR of an i.i.d. normal matrix with the sign of diag(R) folded into Q.
  static Eigen::MatrixXd RandomOrthonormal(int channels, Rng& rng);

 private:
  void SetMatrix(const Eigen::MatrixXd& q);

  Tensor q_;  // (C,C,1,1)
};

// Splits channels in halves; the conditioning net sees (first half ++ cond)
// and predicts (s_tilde, t) for the second half.
class CondAffineCoupling : public InvertibleLayer {
 public:
  CondAffineCoupling(int channels, int cond_channels, int hidden_channels,
                     Rng& rng, double clamp = kDefaultScaleClamp);

  std::string kind() const override { return "coupling"; }
  LayerIO Forward(const LayerIO& in, const Tensor& cond) override;
  LayerIO Inverse(const LayerIO& in, const Tensor& cond) override;
  void Collect(const std::string& prefix, StateList& out) const override;

  CouplingParams Params(const Tensor& first_half, const Tensor& cond) const;
  ConvNet3& net() { return net_; }

 private:
  int channels_;
  int cond_channels_;
  double clamp_;
  ConvNet3 net_;
};

// h' = s * h + t on all channels with (s_tilde, t) predicted from cond alone.
class AffineInjector : public InvertibleLayer {
 public:
  AffineInjector(int channels, int cond_channels, int hidden_channels,
                 Rng& rng, double clamp = kDefaultScaleClamp);

  std::string kind() const override { return "injector"; }
  LayerIO Forward(const LayerIO& in, const Tensor& cond) override;
  LayerIO Inverse(const LayerIO& in, const Tensor& cond) override;
  void Collect(const std::string& prefix, StateList& out) const override;

  CouplingParams Params(const Tensor& cond, const Shape& target) const;
  ConvNet3& net() { return net_; }

 private:
  int channels_;
  double clamp_;
  ConvNet3 net_;
};

// 2x2 space-to-depth; a permutation, so its logdet is 0.
class Squeeze : public InvertibleLayer {
 public:
  std::string kind() const override { return "squeeze"; }
  LayerIO Forward(const LayerIO& in, const Tensor& cond) override;
  LayerIO Inverse(const LayerIO& in, const Tensor& cond) override;
  Shape OutputShape(const Shape& in) const override;
  Shape InputShape(const Shape& out) const override;
};

// z = (h - g) / b with b = exp(a), where cond = (g ++ a) along channels.
// Under a standard Laplace prior this one layer is the adaptive-scale L1
// objective.
class ConditionalScaleBias : public InvertibleLayer {
 public:
  std::string kind() const override { return "scale_bias"; }
  LayerIO Forward(const LayerIO& in, const Tensor& cond) override;
  LayerIO Inverse(const LayerIO& in, const Tensor& cond) override;
};

struct SplitResult {
  Tensor kept;
  Tensor emitted;
};

// First half of the channels continues, the second half leaves as latent.
SplitResult SplitChannels(const Tensor& h);
Tensor MergeChannels(const Tensor& kept, const Tensor& emitted);

}  // namespace flowfid

#endif  // FLOWFID_FLOW_LAYERS_HPP_
