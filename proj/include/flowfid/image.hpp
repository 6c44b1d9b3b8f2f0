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

#ifndef FLOWFID_IMAGE_HPP_
#define FLOWFID_IMAGE_HPP_

#include <string>
#include <utility>
#include <vector>

#include "flowfid/tensor.hpp"

namespace flowfid {

// Keys cubic convolution kernel with a = -0.5.
double CubicKernel(double x);

// Resampling matrix for one axis, stored sparsely: taps[o] lists
// (source index, weight) pairs for output sample o. Source coordinates follow
// the pixel-center convention u = (o + 0.5) * in / out - 0.5; when shrinking,
// the kernel is stretched by in/out (antialiasing). Out-of-range taps are
// clamped to the border (edge replication) and weights are renormalized.
struct ResampleAxis {
  std::int64_t in = 0;
  std::int64_t out = 0;
  std::vector<std::vector<std::pair<std::int64_t, double>>> taps;
};

ResampleAxis BicubicAxis(std::int64_t in, std::int64_t out);

// NCHW bicubic resize with the axis weights above (width first, then height).
Tensor BicubicResize(const Tensor& image, std::int64_t out_h, std::int64_t out_w);
// Extents must be divisible by scale.
Tensor BicubicDownsample(const Tensor& image, int scale);
Tensor BicubicUpsample(const Tensor& image, int scale);

// Reported for identical images and used as the ceiling everywhere.
inline constexpr double kPsnrCapDb = 99.0;

// 10 log10(peak^2 / MSE) over all elements, capped at kPsnrCapDb.
double Psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// PSNR between the bicubic downsampling of `sr` and `lr`.
double LrPsnr(const Tensor& sr, const Tensor& lr, int scale);

// 8-bit RGB PNG I/O; values map to [0,1] by /255. Gray is promoted to RGB,
// alpha is rejected. Result shape (1,3,H,W).
Tensor LoadPng(const std::string& path);
// Values are clamped to [0,1], scaled by 255 and rounded half to even.
// A non-empty comment is stored as an uncompressed "flowfid" tEXt chunk.
void SavePng(const std::string& path, const Tensor& image,
             const std::string& comment = "");

}  // namespace flowfid

#endif  // FLOWFID_IMAGE_HPP_
