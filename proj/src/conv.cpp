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

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "flowfid/error.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
  std::int64_t n, cin, h, w, cout, kh, kw, stride, pad, oh, ow;
  std::int64_t patch() const { return cin * kh * kw; }
  std::int64_t pixels() const { return oh * ow; }
  bool pointwise() const {
    return kh == 1 && kw == 1 && stride == 1 && pad == 0;
  }
};

// Column matrix (cin*kh*kw) x (oh*ow) for one batch item.
void Im2Col(const ConvGeometry& g, const double* image, double* col) {
  for (std::int64_t c = 0; c < g.cin; ++c)
    for (std::int64_t ky = 0; ky < g.kh; ++ky)
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        double* row = col + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const double* plane = image + c * g.h * g.w;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t y = oy * g.stride + ky - g.pad;
          double* dst = row + oy * g.ow;
          if (y < 0 || y >= g.h) {
            std::fill(dst, dst + g.ow, 0.0);
            continue;
          }
          const double* src = plane + y * g.w;
          if (g.stride == 1) {
            // valid ox range where 0 <= ox + kx - pad < w
            const std::int64_t lo = std::clamp<std::int64_t>(g.pad - kx, 0, g.ow);
            const std::int64_t hi =
                std::clamp<std::int64_t>(g.w + g.pad - kx, lo, g.ow);
            std::fill(dst, dst + lo, 0.0);
            std::copy(src + lo + kx - g.pad, src + hi + kx - g.pad, dst + lo);
            std::fill(dst + hi, dst + g.ow, 0.0);
            continue;
          }
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t x = ox * g.stride + kx - g.pad;
            dst[ox] = (x < 0 || x >= g.w) ? 0.0 : src[x];
          }
        }
      }
}

void Col2Im(const ConvGeometry& g, const double* col, double* image) {
  for (std::int64_t c = 0; c < g.cin; ++c)
    for (std::int64_t ky = 0; ky < g.kh; ++ky)
      for (std::int64_t kx = 0; kx < g.kw; ++kx) {
        const double* row = col + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        double* plane = image + c * g.h * g.w;
        for (std::int64_t oy = 0; oy < g.oh; ++oy) {
          const std::int64_t y = oy * g.stride + ky - g.pad;
          if (y < 0 || y >= g.h) continue;
          if (g.stride == 1) {
            const std::int64_t lo = std::clamp<std::int64_t>(g.pad - kx, 0, g.ow);
            const std::int64_t hi =
                std::clamp<std::int64_t>(g.w + g.pad - kx, lo, g.ow);
            double* dst = plane + y * g.w + kx - g.pad;
            const double* src = row + oy * g.ow;
            for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
            continue;
          }
          for (std::int64_t ox = 0; ox < g.ow; ++ox) {
            const std::int64_t x = ox * g.stride + kx - g.pad;
            if (x >= 0 && x < g.w) plane[y * g.w + x] += row[oy * g.ow + ox];
          }
        }
      }
}

}  // namespace

Tensor Conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw ShapeError("conv2d: input " + ShapeToString(input.shape()) +
                     " kernel " + ShapeToString(kernel.shape()));
  }
  if (input.dim(1) != kernel.dim(1)) {
    throw ShapeError("conv2d: channel mismatch, input has " +
                     std::to_string(input.dim(1)) + ", kernel expects " +
                     std::to_string(kernel.dim(1)));
  }
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: bad stride/padding");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 kernel.dim(0), kernel.dim(2), kernel.dim(3), stride, padding,
                 0, 0};
  g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw ShapeError("conv2d: bias " + ShapeToString(bias.shape()));
  }

  const std::int64_t in_item = g.cin * g.h * g.w;
  const std::int64_t out_item = g.cout * g.pixels();
  std::vector<double> out(static_cast<std::size_t>(g.n * out_item));
  Eigen::Map<const RowMat> wm(kernel.values().data(), g.cout, g.patch());
  std::vector<double> col;
  if (!g.pointwise()) col.resize(static_cast<std::size_t>(g.patch() * g.pixels()));
  for (std::int64_t b = 0; b < g.n; ++b) {
    const double* image = input.values().data() + b * in_item;
    const double* cols = image;
    if (!g.pointwise()) {
      Im2Col(g, image, col.data());
      cols = col.data();
    }
    Eigen::Map<const RowMat> cm(cols, g.patch(), g.pixels());
    Eigen::Map<RowMat> om(out.data() + b * out_item, g.cout, g.pixels());
    om.noalias() = wm * cm;
    if (bias.defined()) {
      auto bv = bias.values();
      for (std::int64_t o = 0; o < g.cout; ++o) om.row(o).array() += bv[o];
    }
  }

  auto backward = [g, in_item, out_item](detail::Node& self) {
    detail::Node& nin = *self.inputs[0];
    detail::Node& nk = *self.inputs[1];
    Eigen::Map<const RowMat> wm(nk.data.data(), g.cout, g.patch());
    std::vector<double> col;
    if (!g.pointwise()) col.resize(static_cast<std::size_t>(g.patch() * g.pixels()));
    std::vector<double> dcol(col.size());
    for (std::int64_t b = 0; b < g.n; ++b) {
      Eigen::Map<const RowMat> gout(self.grad.data() + b * out_item, g.cout,
                                    g.pixels());
      const double* image = nin.data.data() + b * in_item;
      if (nk.requires_grad) {
        const double* cols = image;
        if (!g.pointwise()) {
          Im2Col(g, image, col.data());
          cols = col.data();
        }
        Eigen::Map<const RowMat> cm(cols, g.patch(), g.pixels());
        Eigen::Map<RowMat> gw(nk.EnsureGrad().data(), g.cout, g.patch());
        gw.noalias() += gout * cm.transpose();
      }
      if (nin.requires_grad) {
        double* gimage = nin.EnsureGrad().data() + b * in_item;
        if (g.pointwise()) {
          Eigen::Map<RowMat> gi(gimage, g.cin, g.pixels());
          gi.noalias() += wm.transpose() * gout;
        } else {
          Eigen::Map<RowMat> dc(dcol.data(), g.patch(), g.pixels());
          dc.noalias() = wm.transpose() * gout;
          Col2Im(g, dcol.data(), gimage);
        }
      }
      if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
        auto& gb = self.inputs[2]->EnsureGrad();
        // Plain loop: Eigen's vectorized sum depends on pointer alignment.
        for (std::int64_t o = 0; o < g.cout; ++o) {
          const double* row = gout.row(o).data();
          double acc = 0.0;
          for (std::int64_t p = 0; p < g.pixels(); ++p) acc += row[p];
          gb[o] += acc;
        }
      }
    }
  };
  std::vector<Tensor> inputs{input, kernel};
  if (bias.defined()) inputs.push_back(bias);
  return detail::RecordOp("conv2d", {g.n, g.cout, g.oh, g.ow}, std::move(out),
                          inputs, std::move(backward));
}

}  // namespace flowfid
