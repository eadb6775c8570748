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

#include "lesionfuse/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "lesionfuse/error.hpp"

namespace lesionfuse {
namespace {

void clip(Image& img) {
  for (auto& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

cv::Mat to_mat(const Image& img) {
  cv::Mat m(img.height, img.width, CV_64FC3);
  std::copy(img.data.begin(), img.data.end(), m.ptr<double>(0));
  return m;
}

Image from_mat(const cv::Mat& m) {
  cv::Mat d;
  m.convertTo(d, CV_64FC3);
  Image img(d.rows, d.cols);
  if (!d.isContinuous()) d = d.clone();
  std::copy(d.ptr<double>(0), d.ptr<double>(0) + img.data.size(), img.data.begin());
  return img;
}

double gray_of(const Image& img, int y, int x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

void adjust_brightness(Image& img, double f) {
  for (auto& v : img.data) v *= f;
  clip(img);
}

void adjust_contrast(Image& img, double f) {
  double mean = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) mean += gray_of(img, y, x);
  mean /= static_cast<double>(img.pixels());
  for (auto& v : img.data) v = (v - mean) * f + mean;
  clip(img);
}

void adjust_saturation(Image& img, double f) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double g = gray_of(img, y, x);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = g + f * (img.at(y, x, c) - g);
    }
  clip(img);
}

void adjust_hue(Image& img, double shift) {
  cv::Mat rgb;
  to_mat(img).convertTo(rgb, CV_32FC3);
  cv::Mat hsv;
  cv::cvtColor(rgb, hsv, cv::COLOR_RGB2HSV);
  const float degrees = static_cast<float>(shift * 360.0);
  for (int y = 0; y < hsv.rows; ++y) {
    auto* row = hsv.ptr<cv::Vec3f>(y);
    for (int x = 0; x < hsv.cols; ++x) {
      float h = std::fmod(row[x][0] + degrees, 360.0f);
      if (h < 0) h += 360.0f;
      row[x][0] = h;
    }
  }
  cv::cvtColor(hsv, rgb, cv::COLOR_HSV2RGB);
  img = from_mat(rgb);
  clip(img);
}

Image flip(const Image& img, bool horizontal) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int sy = horizontal ? y : img.height - 1 - y;
      const int sx = horizontal ? img.width - 1 - x : x;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  return out;
}

}  // namespace

std::array<double, 3> estimate_illuminant(const Image& image, double p) {
  if (image.empty()) throw InvalidArgument("shades_of_gray: empty image");
  if (!(p >= 1.0)) throw InvalidArgument("shades_of_gray: norm order p must be >= 1");
  std::array<double, 3> e{};
  const double n = static_cast<double>(image.pixels());
  if (std::isinf(p)) {
    for (std::size_t i = 0; i < image.data.size(); ++i)
      e[i % 3] = std::max(e[i % 3], image.data[i]);
    return e;
  }
  for (std::size_t i = 0; i < image.data.size(); ++i) e[i % 3] += std::pow(image.data[i], p);
  for (auto& v : e) v = std::pow(v / n, 1.0 / p);
  return e;
}

ColorConstancyResult shades_of_gray(const Image& image, const ColorConstancyConfig& config) {
  ColorConstancyResult result;
  result.illuminant = estimate_illuminant(image, config.p);
  const auto& e = result.illuminant;
  if (e[0] <= 0.0 || e[1] <= 0.0 || e[2] <= 0.0) {
    if (config.zero_channel == ZeroChannelPolicy::error)
      throw InvalidArgument("shades_of_gray: image has an all-zero channel");
    result.image = image;
    result.passed_through = true;
    return result;
  }
  const double target = (e[0] + e[1] + e[2]) / 3.0;
  const std::array<double, 3> scale = {target / e[0], target / e[1], target / e[2]};
  result.image = image;
  for (std::size_t i = 0; i < result.image.data.size(); ++i) {
    double v = std::clamp(result.image.data[i] * scale[i % 3], 0.0, 1.0);
    if (config.output_gamma) v = std::pow(v, 1.0 / *config.output_gamma);
    result.image.data[i] = v;
  }
  return result;
}

AugmentPolicy AugmentPolicy::identity() {
  AugmentPolicy p;
  p.color_enabled = false;
  p.hflip_enabled = false;
  p.vflip_enabled = false;
  p.rotation_enabled = false;
  p.translation_enabled = false;
  p.scale_enabled = false;
  p.shear_enabled = false;
  p.noise_enabled = false;
  p.blur_enabled = false;
  return p;
}

void AugmentPolicy::validate() const {
  auto fail = [](const char* what) {
    throw InvalidArgument(fmt::format("augment policy: {}", what));
  };
  if (brightness < 0 || contrast < 0 || saturation < 0 || hue < 0 || hue > 0.5)
    fail("color jitter magnitudes must be non-negative, hue at most 0.5");
  if (hflip_probability < 0 || hflip_probability > 1 || vflip_probability < 0 ||
      vflip_probability > 1)
    fail("flip probabilities must lie in [0, 1]");
  if (rotation_degrees < 0 || translation_fraction < 0 || shear_degrees < 0)
    fail("geometric magnitudes must be non-negative");
  if (!(scale_min > 0) || scale_min > scale_max) fail("scale range must satisfy 0 < min <= max");
  if (noise_std < 0) fail("noise std must be non-negative");
  if (blur_min < 0 || blur_min > blur_max) fail("blur range must satisfy 0 <= min <= max");
}

bool AugmentPolicy::any_enabled() const {
  return color_enabled || hflip_enabled || vflip_enabled || rotation_enabled ||
         translation_enabled || scale_enabled || shear_enabled || noise_enabled || blur_enabled;
}

Image augment(const Image& image, const AugmentPolicy& policy, std::mt19937_64& rng) {
  policy.validate();
  if (image.empty()) throw InvalidArgument("augment: empty image");
  using Uniform = std::uniform_real_distribution<double>;
  auto symmetric = [&](double m) { return Uniform(-m, m)(rng); };

  Image img = image;
  if (policy.color_enabled) {
    adjust_brightness(img, 1.0 + symmetric(policy.brightness));
    adjust_contrast(img, 1.0 + symmetric(policy.contrast));
    adjust_saturation(img, 1.0 + symmetric(policy.saturation));
    const double h = symmetric(policy.hue);
    if (h != 0.0) adjust_hue(img, h);
  }

  if (policy.hflip_enabled && Uniform(0.0, 1.0)(rng) < policy.hflip_probability)
    img = flip(img, true);
  if (policy.vflip_enabled && Uniform(0.0, 1.0)(rng) < policy.vflip_probability)
    img = flip(img, false);

  const bool affine = policy.rotation_enabled || policy.translation_enabled ||
                      policy.scale_enabled || policy.shear_enabled;
  if (affine) {
    const double angle = policy.rotation_enabled ? symmetric(policy.rotation_degrees) : 0.0;
    const double tx = policy.translation_enabled
                          ? symmetric(policy.translation_fraction) * img.width : 0.0;
    const double ty = policy.translation_enabled
                          ? symmetric(policy.translation_fraction) * img.height : 0.0;
    const double s = policy.scale_enabled ? Uniform(policy.scale_min, policy.scale_max)(rng) : 1.0;
    const double shear = policy.shear_enabled ? symmetric(policy.shear_degrees) : 0.0;

    // Forward map about the image centre: T(t) * C * R * Sh * S * C^-1.
    const double a = angle * std::numbers::pi / 180.0;
    const double sh = std::tan(shear * std::numbers::pi / 180.0);
    const double ca = std::cos(a), sa = std::sin(a);
    // R * Sh * S with Sh = [[1, sh], [0, 1]]
    const double m00 = s * ca, m01 = s * (ca * sh - sa);
    const double m10 = s * sa, m11 = s * (sa * sh + ca);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    cv::Mat m = (cv::Mat_<double>(2, 3) << m00, m01, cx - m00 * cx - m01 * cy + tx,
                 m10, m11, cy - m10 * cx - m11 * cy + ty);
    cv::Mat warped;
    cv::warpAffine(to_mat(img), warped, m, cv::Size(img.width, img.height), cv::INTER_LINEAR,
                   cv::BORDER_REFLECT_101);
    img = from_mat(warped);
    clip(img);
  }

  if (policy.noise_enabled && policy.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, policy.noise_std);
    for (auto& v : img.data) v += noise(rng);
    clip(img);
  }

  if (policy.blur_enabled) {
    const double sigma = Uniform(policy.blur_min, policy.blur_max)(rng);
    if (sigma > 1e-3) {
      cv::Mat blurred;
      cv::GaussianBlur(to_mat(img), blurred, cv::Size(0, 0), sigma, sigma, cv::BORDER_REFLECT_101);
      img = from_mat(blurred);
      clip(img);
    }
  }
  return img;
}

Image standardize(const Image& image, int side, const std::array<double, 3>& mean,
                  const std::array<double, 3>& std) {
  if (side <= 0) throw InvalidArgument("standardize: side must be positive");
  if (image.empty()) throw InvalidArgument("standardize: zero-area input image");
  for (double s : std) if (!(s > 0.0)) throw InvalidArgument("standardize: std must be positive");

  Image out;
  if (image.height == side && image.width == side) {
    out = image;
  } else {
    cv::Mat resized;
    cv::resize(to_mat(image), resized, cv::Size(side, side), 0, 0, cv::INTER_LINEAR);
    out = from_mat(resized);
  }
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (out.data[i] - mean[i % 3]) / std[i % 3];
  return out;
}

}  // namespace lesionfuse
