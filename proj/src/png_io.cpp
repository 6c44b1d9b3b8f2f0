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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <vector>

#include "flowfid/error.hpp"
#include "flowfid/image.hpp"

namespace flowfid {

Tensor LoadPng(const std::string& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw FormatError("cannot read PNG '" + path + "': " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    png_image_free(&image);
    throw FormatError("PNG '" + path + "' has an alpha channel");
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw FormatError("cannot decode PNG '" + path + "': " + image.message);
  }
  const std::int64_t h = image.height, w = image.width;
  std::vector<double> values(static_cast<std::size_t>(3 * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < 3; ++c) {
        values[(c * h + y) * w + x] = buffer[(y * w + x) * 3 + c] / 255.0;
      }
  return Tensor({1, 3, h, w}, std::move(values));
}

void SavePng(const std::string& path, const Tensor& tensor,
             const std::string& comment) {
  if (tensor.rank() != 4 || tensor.dim(0) != 1 || tensor.dim(1) != 3) {
    throw ShapeError("save_png expects (1,3,H,W), got " +
                     ShapeToString(tensor.shape()));
  }
  const std::int64_t h = tensor.dim(2), w = tensor.dim(3);
  auto v = tensor.values();
  std::vector<png_byte> buffer(static_cast<std::size_t>(3 * h * w));
  for (std::int64_t y = 0; y < h; ++y)
    for (std::int64_t x = 0; x < w; ++x)
      for (std::int64_t c = 0; c < 3; ++c) {
        const double scaled = std::clamp(v[(c * h + y) * w + x], 0.0, 1.0) * 255.0;
        buffer[(y * w + x) * 3 + c] =
            static_cast<png_byte>(std::nearbyint(scaled));
      }

  std::FILE* file = std::fopen(path.c_str(), "wb");
  if (file == nullptr) throw FormatError("cannot write PNG '" + path + "'");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(file);
    throw FormatError("cannot write PNG '" + path + "'");
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Uncompressed tEXt so the provenance stays greppable.
  std::string key = "flowfid";
  std::string text = comment;
  png_text entry;
  std::memset(&entry, 0, sizeof(entry));
  if (!comment.empty()) {
    entry.compression = PNG_TEXT_COMPRESSION_NONE;
    entry.key = key.data();
    entry.text = text.data();
    entry.text_length = text.size();
    png_set_text(png, info, &entry, 1);
  }
  png_write_info(png, info);
  for (std::int64_t y = 0; y < h; ++y) {
    png_write_row(png, buffer.data() + y * w * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(file) != 0) throw FormatError("cannot write PNG '" + path + "'");
}

}  // namespace flowfid
