/*
 * Copyright 2026 The lesionfuse Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace lesionfuse {

/// Interleaved RGB image with real-valued samples, row-major (y, x, channel).
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w * 3, fill) {}

  double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  bool empty() const { return height <= 0 || width <= 0; }
  bool operator==(const Image&) const = default;
};

/// Loads PNG, JPEG or any raster format OpenCV decodes. Values in [0, 1], RGB.
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit image; values are clipped to [0, 1] and rounded.
void write_image(const std::filesystem::path& path, const Image& image);

}  // namespace lesionfuse
