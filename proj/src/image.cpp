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

#include "flowfid/image.hpp"

#include <algorithm>
#include <cmath>

#include "flowfid/error.hpp"

namespace flowfid {

double CubicKernel(double x) {
  const double ax = std::abs(x);
  const double ax2 = ax * ax;
  const double ax3 = ax2 * ax;
  if (ax <= 1.0) return 1.5 * ax3 - 2.5 * ax2 + 1.0;
  if (ax < 2.0) return -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0;
  return 0.0;
}

ResampleAxis BicubicAxis(std::int64_t in, std::int64_t out) {
  if (in < 1 || out < 1) throw ShapeError("bicubic: empty axis");
  ResampleAxis axis;
  axis.in = in;
  axis.out = out;
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  const double stretch = std::max(ratio, 1.0);
  const double support = 2.0 * stretch;
  axis.taps.resize(static_cast<std::size_t>(out));
  for (std::int64_t o = 0; o < out; ++o) {
    const double u = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    const auto first = static_cast<std::int64_t>(std::floor(u - support));
    const auto last = static_cast<std::int64_t>(std::ceil(u + support));
    std::vector<double> weight(static_cast<std::size_t>(in), 0.0);
    double total = 0.0;
    for (std::int64_t j = first; j <= last; ++j) {
      const double w = CubicKernel((u - static_cast<double>(j)) / stretch);
      if (w == 0.0) continue;
      weight[std::clamp<std::int64_t>(j, 0, in - 1)] += w;
      total += w;
    }
    for (std::int64_t j = 0; j < in; ++j) {
      if (weight[j] != 0.0) axis.taps[o].emplace_back(j, weight[j] / total);
    }
  }
  return axis;
}

Tensor BicubicResize(const Tensor& image, std::int64_t out_h,
                     std::int64_t out_w) {
  if (image.rank() != 4) {
    throw ShapeError("bicubic expects NCHW, got " + ShapeToString(image.shape()));
  }
  const auto planes = image.dim(0) * image.dim(1);
  const auto h = image.dim(2), w = image.dim(3);
  const ResampleAxis ax = BicubicAxis(w, out_w);
  const ResampleAxis ay = BicubicAxis(h, out_h);
  auto src = image.values();
  std::vector<double> rows(static_cast<std::size_t>(planes * h * out_w), 0.0);
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const auto& [j, wt] : ax.taps[x]) acc += wt * src[(p * h + y) * w + j];
        rows[(p * h + y) * out_w + x] = acc;
      }
  std::vector<double> out(static_cast<std::size_t>(planes * out_h * out_w), 0.0);
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t y = 0; y < out_h; ++y)
      for (std::int64_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (const auto& [j, wt] : ay.taps[y]) acc += wt * rows[(p * h + j) * out_w + x];
        out[(p * out_h + y) * out_w + x] = acc;
      }
  return Tensor({image.dim(0), image.dim(1), out_h, out_w}, std::move(out));
}

Tensor BicubicDownsample(const Tensor& image, int scale) {
  if (image.rank() != 4 || scale < 1 || image.dim(2) % scale != 0 ||
      image.dim(3) % scale != 0) {
    throw ShapeError("bicubic downsample: extents of " +
                     ShapeToString(image.shape()) + " not divisible by " +
                     std::to_string(scale));
  }
  return BicubicResize(image, image.dim(2) / scale, image.dim(3) / scale);
}

Tensor BicubicUpsample(const Tensor& image, int scale) {
  if (image.rank() != 4 || scale < 1) throw ShapeError("bicubic upsample");
  return BicubicResize(image, image.dim(2) * scale, image.dim(3) * scale);
}

double Psnr(const Tensor& a, const Tensor& b, double peak) {
  if (a.shape() != b.shape()) {
    throw ShapeError("psnr: " + ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
  auto av = a.values();
  auto bv = b.values();
  // Neumaier summation: a constant difference gives the exact mean square.
  double sum = 0.0, carry = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    const double term = d * d;
    const double t = sum + term;
    carry += std::abs(sum) >= term ? (sum - t) + term : (term - t) + sum;
    sum = t;
  }
  const double mse = (sum + carry) / static_cast<double>(av.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(20.0 * std::log10(peak) - 10.0 * std::log10(mse), kPsnrCapDb);
}

double LrPsnr(const Tensor& sr, const Tensor& lr, int scale) {
  if (sr.rank() != 4 || lr.rank() != 4 || sr.dim(0) != lr.dim(0) ||
      sr.dim(1) != lr.dim(1) || sr.dim(2) != lr.dim(2) * scale ||
      sr.dim(3) != lr.dim(3) * scale) {
    throw ShapeError("lr_psnr: SR " + ShapeToString(sr.shape()) + " is not LR " +
                     ShapeToString(lr.shape()) + " x" + std::to_string(scale));
  }
  return Psnr(BicubicDownsample(sr, scale), lr);
}

}  // namespace flowfid
