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

#include "flowfid/flow_layers.hpp"

#include <Eigen/QR>
#include <cmath>

#include "flowfid/error.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {
namespace {

Tensor PerItemSum(const Tensor& t) { return Sum(t, {1, 2, 3}); }

void RequireEvenChannels(const Tensor& h, const char* layer) {
  if (h.rank() != 4 || h.dim(1) % 2 != 0) {
    throw ShapeError(std::string(layer) + " needs an even channel count, got " +
                     ShapeToString(h.shape()));
  }
}

void RequireSpatialMatch(const Tensor& cond, const Tensor& h, const char* layer) {
  if (!cond.defined()) {
    throw ShapeError(std::string(layer) + " requires conditioning features");
  }
  if (cond.rank() != 4 || cond.dim(0) != h.dim(0) || cond.dim(2) != h.dim(2) ||
      cond.dim(3) != h.dim(3)) {
    throw ShapeError(std::string(layer) + ": conditioning " +
                     ShapeToString(cond.shape()) + " does not match activation " +
                     ShapeToString(h.shape()));
  }
}

Tensor MatrixToKernel(const Eigen::MatrixXd& m) {
  const auto c = m.rows();
  std::vector<double> v(static_cast<std::size_t>(c * c));
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < c; ++j) v[i * c + j] = m(i, j);
  return Tensor({c, c, 1, 1}, std::move(v));
}

}  // namespace

CouplingParams MakeCouplingParams(const Tensor& raw_s_tilde, const Tensor& t,
                                  double clamp) {
  CouplingParams p;
  p.s_tilde = Clamp(raw_s_tilde, -clamp, clamp);
  Tensor neg = Neg(p.s_tilde);
  p.s = 1.0 + Exp(neg);
  p.log_s = Softplus(neg);
  p.t = t;
  return p;
}

// ---------------------------------------------------------------------------
// ActNorm

ActNorm::ActNorm(int channels)
    : scale_(Tensor::Parameter({1, channels, 1, 1},
                               std::vector<double>(channels, 1.0))),
      bias_(Tensor::Parameter({1, channels, 1, 1},
                              std::vector<double>(channels, 0.0))),
      initialized_(Shape{1}, 0.0) {}

void ActNorm::InitializeFrom(const Tensor& h) {
  if (h.rank() != 4 || h.dim(1) != scale_.dim(1)) {
    throw ShapeError("actnorm init: activation " + ShapeToString(h.shape()) +
                     " vs " + std::to_string(scale_.dim(1)) + " channels");
  }
  const auto n = h.dim(0), c = h.dim(1), hw = h.dim(2) * h.dim(3);
  const double count = static_cast<double>(n * hw);
  auto hv = h.values();
  auto sv = scale_.mutable_values();
  auto bv = bias_.mutable_values();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double mean = 0.0;
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t p = 0; p < hw; ++p) mean += hv[(b * c + ch) * hw + p];
    mean /= count;
    double var = 0.0;
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t p = 0; p < hw; ++p) {
        const double d = hv[(b * c + ch) * hw + p] - mean;
        var += d * d;
      }
    var /= count;
    const double stddev = std::max(std::sqrt(var), 1e-6);
    sv[ch] = 1.0 / stddev;
    bv[ch] = -mean / stddev;
  }
  initialized_.mutable_values()[0] = 1.0;
}

Tensor ActNorm::LogdetPerItem(const Tensor& h) const {
  for (double s : scale_.values()) {
    if (s == 0.0) throw DomainError("actnorm: zero scale");
  }
  return Sum(Log(Abs(scale_))) * static_cast<double>(h.dim(2) * h.dim(3));
}

LayerIO ActNorm::Forward(const LayerIO& in, const Tensor&) {
  if (!initialized()) InitializeFrom(in.activation);
  Tensor contribution = LogdetPerItem(in.activation);
  return {in.activation * scale_ + bias_, in.logdet + contribution};
}

LayerIO ActNorm::Inverse(const LayerIO& in, const Tensor&) {
  Tensor contribution = LogdetPerItem(in.activation);
  return {(in.activation - bias_) / scale_, in.logdet - contribution};
}

void ActNorm::Collect(const std::string& prefix, StateList& out) const {
  out.push_back({prefix + ".scale", scale_, true});
  out.push_back({prefix + ".bias", bias_, true});
  out.push_back({prefix + ".initialized", initialized_, false});
}

// ---------------------------------------------------------------------------
// OrthoMix

Eigen::MatrixXd OrthoMix::RandomOrthonormal(int channels, Rng& rng) {
  Eigen::MatrixXd g(channels, channels);
  for (int i = 0; i < channels; ++i)
    for (int j = 0; j < channels; ++j) g(i, j) = rng.Normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& r = qr.matrixQR();
  for (int j = 0; j < channels; ++j) {
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q;
}

OrthoMix::OrthoMix(int channels, Rng& rng) {
  SetMatrix(RandomOrthonormal(channels, rng));
}

OrthoMix::OrthoMix(const Eigen::MatrixXd& q) {
  if (q.rows() != q.cols() || q.rows() == 0) {
    throw ShapeError("orthomix: matrix must be square");
  }
  const Eigen::MatrixXd defect =
      q.transpose() * q - Eigen::MatrixXd::Identity(q.rows(), q.cols());
  if (defect.cwiseAbs().maxCoeff() > 1e-10) {
    throw DomainError("orthomix: matrix is not orthonormal");
  }
  SetMatrix(q);
}

void OrthoMix::SetMatrix(const Eigen::MatrixXd& q) {
  q_ = MatrixToKernel(q);
}

Eigen::MatrixXd OrthoMix::matrix() const {
  const auto c = q_.dim(0);
  Eigen::MatrixXd m(c, c);
  auto v = q_.values();
  for (Eigen::Index i = 0; i < c; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = v[i * c + j];
  return m;
}

LayerIO OrthoMix::Forward(const LayerIO& in, const Tensor&) {
  return {Conv2d(in.activation, q_, Tensor()), in.logdet};
}

LayerIO OrthoMix::Inverse(const LayerIO& in, const Tensor&) {
  // Transposed on every call so a restored q_ is always honoured.
  return {Conv2d(in.activation, MatrixToKernel(matrix().transpose()), Tensor()),
          in.logdet};
}

void OrthoMix::Collect(const std::string& prefix, StateList& out) const {
  out.push_back({prefix + ".q", q_, false});
}

// ---------------------------------------------------------------------------
// Conditional affine coupling

CondAffineCoupling::CondAffineCoupling(int channels, int cond_channels,
                                       int hidden_channels, Rng& rng,
                                       double clamp)
    : channels_(channels), cond_channels_(cond_channels), clamp_(clamp) {
  if (channels % 2 != 0) {
    throw ShapeError("coupling needs an even channel count, got " +
                     std::to_string(channels));
  }
  net_ = ConvNet3(channels / 2 + cond_channels, hidden_channels, channels, rng);
}

CouplingParams CondAffineCoupling::Params(const Tensor& first_half,
                                          const Tensor& cond) const {
  Tensor net_in = first_half;
  if (cond_channels_ > 0) {
    RequireSpatialMatch(cond, first_half, "coupling");
    net_in = ConcatChannels({first_half, cond});
  }
  Tensor out = net_(net_in);
  const int half = channels_ / 2;
  return MakeCouplingParams(SliceChannels(out, 0, half),
                            SliceChannels(out, half, channels_), clamp_);
}

LayerIO CondAffineCoupling::Forward(const LayerIO& in, const Tensor& cond) {
  RequireEvenChannels(in.activation, "coupling");
  const int half = channels_ / 2;
  Tensor h1 = SliceChannels(in.activation, 0, half);
  Tensor h2 = SliceChannels(in.activation, half, channels_);
  CouplingParams p = Params(h1, cond);
  Tensor out = ConcatChannels({h1, p.s * h2 + p.t});
  return {out, in.logdet + PerItemSum(p.log_s)};
}

LayerIO CondAffineCoupling::Inverse(const LayerIO& in, const Tensor& cond) {
  RequireEvenChannels(in.activation, "coupling");
  const int half = channels_ / 2;
  Tensor h1 = SliceChannels(in.activation, 0, half);
  Tensor h2 = SliceChannels(in.activation, half, channels_);
  CouplingParams p = Params(h1, cond);
  Tensor out = ConcatChannels({h1, (h2 - p.t) / p.s});
  return {out, in.logdet - PerItemSum(p.log_s)};
}

void CondAffineCoupling::Collect(const std::string& prefix,
                                 StateList& out) const {
  net_.Collect(prefix + ".net", out);
}

// ---------------------------------------------------------------------------
// Affine injector

AffineInjector::AffineInjector(int channels, int cond_channels,
                               int hidden_channels, Rng& rng, double clamp)
    : channels_(channels),
      clamp_(clamp),
      net_(cond_channels, hidden_channels, 2 * channels, rng) {}

CouplingParams AffineInjector::Params(const Tensor& cond,
                                      const Shape& target) const {
  if (!cond.defined() || cond.rank() != 4 || target.size() != 4 ||
      cond.dim(0) != target[0] || cond.dim(2) != target[2] ||
      cond.dim(3) != target[3]) {
    throw ShapeError("injector: conditioning " +
                     (cond.defined() ? ShapeToString(cond.shape()) : "<none>") +
                     " does not match activation " + ShapeToString(target));
  }
  Tensor out = net_(cond);
  return MakeCouplingParams(SliceChannels(out, 0, channels_),
                            SliceChannels(out, channels_, 2 * channels_),
                            clamp_);
}

LayerIO AffineInjector::Forward(const LayerIO& in, const Tensor& cond) {
  CouplingParams p = Params(cond, in.activation.shape());
  return {p.s * in.activation + p.t, in.logdet + PerItemSum(p.log_s)};
}

LayerIO AffineInjector::Inverse(const LayerIO& in, const Tensor& cond) {
  CouplingParams p = Params(cond, in.activation.shape());
  return {(in.activation - p.t) / p.s, in.logdet - PerItemSum(p.log_s)};
}

void AffineInjector::Collect(const std::string& prefix, StateList& out) const {
  net_.Collect(prefix + ".net", out);
}

// ---------------------------------------------------------------------------
// Squeeze

LayerIO Squeeze::Forward(const LayerIO& in, const Tensor&) {
  return {SpaceToDepth(in.activation, 2), in.logdet};
}

LayerIO Squeeze::Inverse(const LayerIO& in, const Tensor&) {
  return {DepthToSpace(in.activation, 2), in.logdet};
}

Shape Squeeze::OutputShape(const Shape& in) const {
  if (in.size() != 4 || in[2] % 2 != 0 || in[3] % 2 != 0) {
    throw ShapeError("squeeze needs even spatial extents, got " +
                     ShapeToString(in));
  }
  return {in[0], in[1] * 4, in[2] / 2, in[3] / 2};
}

Shape Squeeze::InputShape(const Shape& out) const {
  return {out[0], out[1] / 4, out[2] * 2, out[3] * 2};
}

// ---------------------------------------------------------------------------
// Conditional scale/bias

LayerIO ConditionalScaleBias::Forward(const LayerIO& in, const Tensor& cond) {
  const auto c = in.activation.dim(1);
  RequireSpatialMatch(cond, in.activation, "scale_bias");
  if (cond.dim(1) != 2 * c) {
    throw ShapeError("scale_bias: conditioning must carry mean and log-scale");
  }
  Tensor g = SliceChannels(cond, 0, c);
  Tensor a = SliceChannels(cond, c, 2 * c);
  Tensor z = (in.activation - g) / Exp(a);
  return {z, in.logdet - PerItemSum(a)};
}

LayerIO ConditionalScaleBias::Inverse(const LayerIO& in, const Tensor& cond) {
  const auto c = in.activation.dim(1);
  RequireSpatialMatch(cond, in.activation, "scale_bias");
  if (cond.dim(1) != 2 * c) {
    throw ShapeError("scale_bias: conditioning must carry mean and log-scale");
  }
  Tensor g = SliceChannels(cond, 0, c);
  Tensor a = SliceChannels(cond, c, 2 * c);
  return {in.activation * Exp(a) + g, in.logdet + PerItemSum(a)};
}

// ---------------------------------------------------------------------------
// Split

SplitResult SplitChannels(const Tensor& h) {
  RequireEvenChannels(h, "split");
  const auto c = h.dim(1);
  return {SliceChannels(h, 0, c / 2), SliceChannels(h, c / 2, c)};
}

Tensor MergeChannels(const Tensor& kept, const Tensor& emitted) {
  return ConcatChannels({kept, emitted});
}

}  // namespace flowfid
