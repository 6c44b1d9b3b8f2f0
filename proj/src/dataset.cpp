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

#include "flowfid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "flowfid/error.hpp"
#include "flowfid/image.hpp"
#include "flowfid/ops.hpp"

namespace flowfid {
namespace {

Tensor Crop(const Tensor& image, std::int64_t y0, std::int64_t x0,
            std::int64_t h, std::int64_t w) {
  const auto c = image.dim(1), src_h = image.dim(2), src_w = image.dim(3);
  auto v = image.values();
  std::vector<double> out(static_cast<std::size_t>(c * h * w));
  for (std::int64_t ch = 0; ch < c; ++ch)
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t x = 0; x < w; ++x)
        out[(ch * h + y) * w + x] = v[(ch * src_h + y0 + y) * src_w + x0 + x];
  return Tensor({1, c, h, w}, std::move(out));
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ImagePair MakeImagePair(std::string id, const Tensor& hr, int scale) {
  if (hr.rank() != 4 || hr.dim(0) != 1) {
    throw ShapeError("image pair expects (1,C,H,W), got " +
                     ShapeToString(hr.shape()));
  }
  if (scale < 1) throw ConfigError("scale must be >= 1");
  const auto h = hr.dim(2) / scale * scale;
  const auto w = hr.dim(3) / scale * scale;
  if (h == 0 || w == 0) throw ShapeError("image smaller than scale factor");
  ImagePair pair;
  pair.id = std::move(id);
  pair.hr = (h == hr.dim(2) && w == hr.dim(3)) ? hr.detach() : Crop(hr, 0, 0, h, w);
  pair.lr = BicubicDownsample(pair.hr, scale);
  pair.scale = scale;
  return pair;
}

Dataset::Dataset(std::vector<ImagePair> pairs, int scale)
    : pairs_(std::move(pairs)), scale_(scale) {
  for (const auto& p : pairs_) {
    if (p.scale != scale_) throw ConfigError("pair " + p.id + " has wrong scale");
  }
}

ImageBatch Dataset::SampleBatch(int batch, int patch, Rng& rng) const {
  if (pairs_.empty()) throw ConfigError("empty dataset");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (patch % scale_ != 0) {
    throw ConfigError("patch size must be a multiple of the scale factor");
  }
  std::vector<Tensor> hrs, lrs;
  for (int b = 0; b < batch; ++b) {
    const ImagePair& p = pairs_[rng.UniformInt(pairs_.size())];
    const auto h = p.hr.dim(2), w = p.hr.dim(3);
    if (h < patch || w < patch) {
      throw ShapeError("image " + p.id + " smaller than the patch size");
    }
    if (h == patch && w == patch) {
      hrs.push_back(p.hr);
      lrs.push_back(p.lr);
      continue;
    }
    const auto y0 = static_cast<std::int64_t>(
                        rng.UniformInt(static_cast<std::uint64_t>((h - patch) / scale_ + 1))) *
                    scale_;
    const auto x0 = static_cast<std::int64_t>(
                        rng.UniformInt(static_cast<std::uint64_t>((w - patch) / scale_ + 1))) *
                    scale_;
    Tensor crop = Crop(p.hr, y0, x0, patch, patch);
    lrs.push_back(BicubicDownsample(crop, scale_));
    hrs.push_back(std::move(crop));
  }
  NoGradGuard no_grad;
  return {ConcatBatch(hrs).detach(), ConcatBatch(lrs).detach()};
}

Dataset Dataset::Slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > pairs_.size()) throw ConfigError("bad dataset slice");
  return Dataset(std::vector<ImagePair>(pairs_.begin() + begin, pairs_.begin() + end),
                 scale_);
}

Tensor SyntheticImage(int size, Rng& rng) {
  const double s = static_cast<double>(size);
  std::vector<double> v(static_cast<std::size_t>(3 * size * size));
  double base[3], gx[3], gy[3], edge[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.Uniform(0.3, 0.7);
    gx[c] = rng.Uniform(-0.4, 0.4);
    gy[c] = rng.Uniform(-0.4, 0.4);
    edge[c] = rng.Uniform(-0.3, 0.3);
  }
  struct Wave {
    double fx, fy, phase, amp, color[3];
  };
  Wave waves[3];
  for (auto& wv : waves) {
    const double cycles = rng.Uniform(1.0, s / 6.0);
    const double angle = rng.Uniform(0.0, std::numbers::pi);
    wv.fx = cycles * std::cos(angle) / s;
    wv.fy = cycles * std::sin(angle) / s;
    wv.phase = rng.Uniform(0.0, 2.0 * std::numbers::pi);
    wv.amp = rng.Uniform(0.02, 0.08);
    for (double& c : wv.color) c = rng.Uniform(0.5, 1.0);
  }
  // Edge: points with n . (p - p0) > 0 get the offset.
  const double theta = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const double nx = std::cos(theta), ny = std::sin(theta);
  const double px = rng.Uniform(0.25, 0.75) * s, py = rng.Uniform(0.25, 0.75) * s;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / s - 0.5, w = (y + 0.5) / s - 0.5;
      const bool lit = nx * (x + 0.5 - px) + ny * (y + 0.5 - py) > 0;
      for (int c = 0; c < 3; ++c) {
        double val = base[c] + gx[c] * u + gy[c] * w + (lit ? edge[c] : 0.0);
        for (const auto& wv : waves) {
          val += wv.amp * wv.color[c] *
                 std::sin(2.0 * std::numbers::pi * (wv.fx * x + wv.fy * y) + wv.phase);
        }
        v[(c * size + y) * size + x] = std::clamp(val, 0.0, 1.0);
      }
    }
  return Tensor({1, 3, size, size}, std::move(v));
}

Dataset MakeSyntheticDataset(int count, int size, int scale, std::uint64_t seed) {
  if (count < 1) throw ConfigError("synthetic dataset needs at least one image");
  if (size % scale != 0) {
    throw ConfigError("synthetic image size must be a multiple of the scale");
  }
  Rng rng(seed, /*stream=*/0xda7a);
  std::vector<ImagePair> pairs;
  pairs.reserve(count);
  for (int i = 0; i < count; ++i) {
    pairs.push_back(MakeImagePair("synthetic_" + std::to_string(i),
                                  SyntheticImage(size, rng), scale));
  }
  return Dataset(std::move(pairs), scale);
}

DatasetManifest ParseManifest(const std::string& text, const std::string& base_dir) {
  DatasetManifest m;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = Trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    try {
      if (key == "image") {
        std::filesystem::path p(value);
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        m.images.push_back(p.string());
      } else if (key == "scale") {
        m.scale = std::stoi(value);
      } else if (key == "kernel") {
        m.kernel = value;
      } else if (key == "seed") {
        m.seed = std::stoull(value);
      } else if (key == "synthetic") {
        m.synthetic = std::stoi(value);
      } else if (key == "synthetic_size") {
        m.synthetic_size = std::stoi(value);
      } else {
        throw FormatError("manifest line " + std::to_string(line_no) +
                          ": unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": bad value for '" + key + "'");
    }
  }
  if (m.kernel != "bicubic") {
    throw FormatError("manifest kernel '" + m.kernel + "' unsupported (bicubic only)");
  }
  return m;
}

DatasetManifest LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseManifest(ss.str(), std::filesystem::path(path).parent_path().string());
}

std::string FormatManifest(const DatasetManifest& m) {
  std::ostringstream os;
  os << "scale = " << m.scale << "\nkernel = " << m.kernel
     << "\nseed = " << m.seed << "\n";
  if (m.synthetic > 0) {
    os << "synthetic = " << m.synthetic << "\nsynthetic_size = " << m.synthetic_size
       << "\n";
  }
  for (const auto& img : m.images) os << "image = " << img << "\n";
  return os.str();
}

Dataset LoadDataset(const DatasetManifest& m) {
  if (m.synthetic > 0) {
    return MakeSyntheticDataset(m.synthetic, m.synthetic_size, m.scale, m.seed);
  }
  if (m.images.empty()) throw ConfigError("manifest lists no images");
  std::vector<ImagePair> pairs;
  for (const auto& path : m.images) {
    pairs.push_back(MakeImagePair(std::filesystem::path(path).stem().string(),
                                  LoadPng(path), m.scale));
  }
  return Dataset(std::move(pairs), m.scale);
}

}  // namespace flowfid
