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


#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace flowfid::oracle {

Tensor NaiveConv2d(const Tensor& input, const Tensor& kernel,
                   const Tensor& bias, int stride, int padding) {
  const std::int64_t n = input.dim(0), ci = input.dim(1), h = input.dim(2),
                     w = input.dim(3);
  const std::int64_t co = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
  const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
  const std::int64_t ow = (w + 2 * padding - kw) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n * co * oh * ow));
  auto in = input.values();
  auto k = kernel.values();
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t o = 0; o < co; ++o)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
          double acc = bias.defined() ? bias.at(o) : 0.0;
          for (std::int64_t c = 0; c < ci; ++c)
            for (std::int64_t dy = 0; dy < kh; ++dy)
              for (std::int64_t dx = 0; dx < kw; ++dx) {
                const std::int64_t sy = y * stride + dy - padding;
                const std::int64_t sx = x * stride + dx - padding;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                acc += in[((b * ci + c) * h + sy) * w + sx] *
                       k[((o * ci + c) * kh + dy) * kw + dx];
              }
          out[((b * co + o) * oh + y) * ow + x] = acc;
        }
  return Tensor({n, co, oh, ow}, std::move(out));
}

void ReferenceAdam::Step(std::vector<double>& params,
                         const std::vector<double>& grads) {
  if (m.empty()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  ++t;
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1 - beta1) * grads[i];
    v[i] = beta2 * v[i] + (1 - beta2) * grads[i] * grads[i];
    const double mhat = m[i] / (1 - std::pow(beta1, static_cast<double>(t)));
    const double vhat = v[i] / (1 - std::pow(beta2, static_cast<double>(t)));
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

double Keys(double x) {
  x = std::fabs(x);
  if (x <= 1) return (1.5 * x - 2.5) * x * x + 1;
  if (x < 2) return ((-0.5 * x + 2.5) * x - 4) * x + 2;
  return 0;
}

std::vector<double> DownsampleWeights(std::int64_t in, int scale,
                                      std::int64_t o) {
  const double center = (o + 0.5) * scale - 0.5;
  std::vector<double> w(static_cast<std::size_t>(in), 0.0);
  double total = 0;
  // Wide enough to cover the stretched support on both sides.
  for (std::int64_t j = -4 * scale; j < in + 4 * scale; ++j) {
    const double k = Keys((center - j) / scale);
    w[static_cast<std::size_t>(std::clamp<std::int64_t>(j, 0, in - 1))] += k;
    total += k;
  }
  for (double& x : w) x /= total;
  return w;
}

Tensor NaiveBicubicDownsample(const Tensor& image, int scale) {
  const std::int64_t n = image.dim(0), c = image.dim(1), h = image.dim(2),
                     w = image.dim(3);
  const std::int64_t oh = h / scale, ow = w / scale;
  std::vector<double> out(static_cast<std::size_t>(n * c * oh * ow));
  auto in = image.values();
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    const auto wy = DownsampleWeights(h, scale, oy);
    for (std::int64_t ox = 0; ox < ow; ++ox) {
      const auto wx = DownsampleWeights(w, scale, ox);
      for (std::int64_t b = 0; b < n; ++b)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          double acc = 0;
          for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
              acc += wy[y] * wx[x] * in[((b * c + ch) * h + y) * w + x];
          out[((b * c + ch) * oh + oy) * ow + ox] = acc;
        }
    }
  }
  return Tensor({n, c, oh, ow}, std::move(out));
}

}  // namespace flowfid::oracle
