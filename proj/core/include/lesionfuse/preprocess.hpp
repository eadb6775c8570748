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

// Image normalization: shades-of-gray color constancy, training-time
// augmentation and resize/standardize.

#pragma once

#include <array>
#include <optional>
#include <random>

#include "lesionfuse/image.hpp"

namespace lesionfuse {

enum class ZeroChannelPolicy { identity, error };

struct ColorConstancyConfig {
  /// Minkowski norm order; +infinity selects the white-patch (max) estimate.
  double p = 6.0;
  /// When set, corrected values are re-encoded as v^(1/gamma).
  std::optional<double> output_gamma;
  ZeroChannelPolicy zero_channel = ZeroChannelPolicy::identity;
};

struct ColorConstancyResult {
  Image image;
  std::array<double, 3> illuminant{};
  /// Set when a channel had zero energy and the image was passed through.
  bool passed_through = false;
};

/// Per channel c: e_c = (mean v^p)^(1/p) and out_c = in_c * mean(e) / e_c,
/// clipped to [0, 1].
ColorConstancyResult shades_of_gray(const Image& image, const ColorConstancyConfig& config = {});

/// Illuminant estimate used by shades_of_gray.
std::array<double, 3> estimate_illuminant(const Image& image, double p);

struct AugmentPolicy {
  // Color jitter. Brightness, contrast and saturation factors are drawn from
  // [1 - m, 1 + m]; hue is shifted by a fraction of a full turn in [-m, m].
  bool color_enabled = true;
  double brightness = 0.25;
  double contrast = 0.25;
  double saturation = 0.25;
  double hue = 0.05;

  bool hflip_enabled = true;
  double hflip_probability = 0.5;
  bool vflip_enabled = true;
  double vflip_probability = 0.5;

  bool rotation_enabled = true;
  double rotation_degrees = 90.0;
  bool translation_enabled = true;
  double translation_fraction = 0.1;
  bool scale_enabled = true;
  double scale_min = 0.8;
  double scale_max = 1.2;
  bool shear_enabled = true;
  double shear_degrees = 10.0;

  bool noise_enabled = true;
  double noise_std = 0.01;

  bool blur_enabled = true;
  double blur_min = 0.0;
  double blur_max = 1.5;

  /// Every transform disabled.
  static AugmentPolicy identity();
  /// Throws InvalidArgument on reversed ranges or probabilities outside [0, 1].
  void validate() const;
  bool any_enabled() const;
};

/// Random augmentation applied in the fixed order color jitter -> flips and
/// affine warp -> gaussian noise -> blur. Output is clipped to [0, 1].
Image augment(const Image& image, const AugmentPolicy& policy, std::mt19937_64& rng);

/// Bilinear resize to side x side followed by per-channel (v - mean) / std.
Image standardize(const Image& image, int side, const std::array<double, 3>& mean,
                  const std::array<double, 3>& std);

inline constexpr std::array<double, 3> kImageNetMean = {0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImageNetStd = {0.229, 0.224, 0.225};

}  // namespace lesionfuse
