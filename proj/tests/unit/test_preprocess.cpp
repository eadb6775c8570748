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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "lesionfuse/error.hpp"
#include "lesionfuse/image.hpp"
#include "lesionfuse/preprocess.hpp"
#include "test_util.hpp"

using namespace lesionfuse;

namespace {

std::array<double, 3> channel_means(const Image& img) {
  std::array<double, 3> m{};
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) m[c] += img.at(y, x, c);
  for (auto& v : m) v /= static_cast<double>(img.pixels());
  return m;
}

std::array<double, 3> pnorm_means(const Image& img, double p) {
  std::array<double, 3> m{};
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) m[c] += std::pow(img.at(y, x, c), p);
  for (auto& v : m) v = std::pow(v / static_cast<double>(img.pixels()), 1.0 / p);
  return m;
}

double max_abs_diff(const Image& a, const Image& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

// Every channel holds a permutation of the same values, so every p-norm
// mean is achromatic.
Image achromatic_scene(int side, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> values(static_cast<std::size_t>(side) * side);
  for (auto& v : values) v = u(rng);
  Image img(side, side);
  for (int c = 0; c < 3; ++c) {
    std::shuffle(values.begin(), values.end(), rng);
    for (std::size_t i = 0; i < values.size(); ++i) img.data[i * 3 + c] = values[i];
  }
  return img;
}

}  // namespace

TEST(ColorConstancy, UniformGrayIsUnchanged) {
  Image img(8, 8, 0.4);
  for (double p : {1.0, 6.0, std::numeric_limits<double>::infinity()}) {
    ColorConstancyConfig cc;
    cc.p = p;
    EXPECT_LT(max_abs_diff(shades_of_gray(img, cc).image, img), 1e-12);
  }
}

TEST(ColorConstancy, SinglePixelClosedForm) {
  Image img(1, 1);
  img.at(0, 0, 0) = 0.5;
  img.at(0, 0, 1) = 0.25;
  img.at(0, 0, 2) = 0.25;
  for (double p : {1.0, 2.0, 6.0, std::numeric_limits<double>::infinity()}) {
    ColorConstancyConfig cc;
    cc.p = p;
    const auto out = shades_of_gray(img, cc).image;
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(0, 0, c), 1.0 / 3.0, 1e-12) << "p=" << p;
  }
}

TEST(ColorConstancy, GainsOnGrayWorldSceneAreRemoved) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> g(0.0, 0.45);
  Image img(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double v = g(rng);
      img.at(y, x, 0) = 2.0 * v;
      img.at(y, x, 1) = v;
      img.at(y, x, 2) = v;
    }
  ColorConstancyConfig cc;
  cc.p = 1.0;
  const auto m = channel_means(shades_of_gray(img, cc).image);
  EXPECT_NEAR(m[0], m[1], 1e-6);
  EXPECT_NEAR(m[1], m[2], 1e-6);
}

TEST(ColorConstancy, GrayWorldOracleAtPOne) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Image img = lftest::random_image(64, 64, rng, 0.05, 0.95);
    ColorConstancyConfig cc;
    cc.p = 1.0;
    const auto out = shades_of_gray(img, cc).image;
    // Oracle: plain gray-world scaling with clipping.
    const auto m = channel_means(img);
    const double gray = (m[0] + m[1] + m[2]) / 3.0;
    Image expected = img;
    for (std::size_t i = 0; i < expected.data.size(); ++i)
      expected.data[i] = std::clamp(img.data[i] * gray / m[i % 3], 0.0, 1.0);
    EXPECT_LT(max_abs_diff(out, expected), 1e-6);
  }
}

TEST(ColorConstancy, IdempotentWithoutClipping) {
  std::mt19937_64 rng(21);
  for (double p : {1.0, 2.0, 6.0, std::numeric_limits<double>::infinity()}) {
    Image img = lftest::random_image(64, 64, rng, 0.2, 0.6);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] *= (i % 3 == 0 ? 1.2 : i % 3 == 1 ? 1.0 : 0.85);
    ColorConstancyConfig cc;
    cc.p = p;
    const auto once = shades_of_gray(img, cc).image;
    const auto twice = shades_of_gray(once, cc).image;
    EXPECT_LT(max_abs_diff(once, twice), 1e-5) << "p=" << p;
    if (std::isfinite(p)) {
      const auto e = pnorm_means(once, p);
      EXPECT_NEAR(e[0], e[1], 1e-5);
      EXPECT_NEAR(e[1], e[2], 1e-5);
    }
  }
}

TEST(ColorConstancy, RecoversChannelGainScene) {
  std::mt19937_64 rng(33);
  const std::array<double, 3> gains = {1.3, 0.9, 0.7};
  for (double p : {1.0, 4.0, 6.0, std::numeric_limits<double>::infinity()}) {
    const Image scene = achromatic_scene(64, rng, 0.05, 0.7);
    Image cast = scene;
    for (std::size_t i = 0; i < cast.data.size(); ++i) cast.data[i] *= gains[i % 3];
    ColorConstancyConfig cc;
    cc.p = p;
    const auto out = shades_of_gray(cast, cc).image;
    // Correction restores the scene up to the mean gain.
    const double k = (gains[0] + gains[1] + gains[2]) / 3.0;
    Image expected = scene;
    for (auto& v : expected.data) v *= k;
    EXPECT_LT(max_abs_diff(out, expected), 1e-5) << "p=" << p;
  }
}

TEST(ColorConstancy, ZeroChannelPolicy) {
  Image img(4, 4, 0.5);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(y, x, 2) = 0.0;
  const auto passed = shades_of_gray(img);
  EXPECT_TRUE(passed.passed_through);
  EXPECT_EQ(passed.image, img);
  ColorConstancyConfig strict;
  strict.zero_channel = ZeroChannelPolicy::error;
  EXPECT_THROW(shades_of_gray(img, strict), InvalidArgument);
}

TEST(ColorConstancy, RejectsNormBelowOne) {
  ColorConstancyConfig cc;
  cc.p = 0.5;
  EXPECT_THROW(shades_of_gray(Image(2, 2, 0.5), cc), InvalidArgument);
}

TEST(ColorConstancy, OutputGammaReencodes) {
  std::mt19937_64 rng(2);
  const Image img = achromatic_scene(16, rng, 0.1, 0.9);
  ColorConstancyConfig cc;
  cc.output_gamma = 2.2;
  const auto out = shades_of_gray(img, cc).image;
  for (std::size_t i = 0; i < img.data.size(); ++i)
    EXPECT_NEAR(out.data[i], std::pow(img.data[i], 1.0 / 2.2), 1e-9);
}

TEST(Augment, IdentityPolicyIsExact) {
  std::mt19937_64 rng(1);
  const Image img = lftest::random_image(20, 24, rng);
  std::mt19937_64 state(99);
  EXPECT_EQ(augment(img, AugmentPolicy::identity(), state), img);
}

TEST(Augment, DeterministicForRngState) {
  std::mt19937_64 rng(1);
  const Image img = lftest::random_image(32, 32, rng);
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(augment(img, AugmentPolicy{}, a), augment(img, AugmentPolicy{}, b));
}

TEST(Augment, HorizontalFlipReversesColumns) {
  std::mt19937_64 rng(1);
  const Image img = lftest::random_image(9, 13, rng);
  AugmentPolicy policy = AugmentPolicy::identity();
  policy.hflip_enabled = true;
  policy.hflip_probability = 1.0;
  std::mt19937_64 state(3);
  const auto out = augment(img, policy, state);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(y, x, c), img.at(y, img.width - 1 - x, c));
}

TEST(Augment, VerticalFlipReversesRows) {
  std::mt19937_64 rng(1);
  const Image img = lftest::random_image(9, 13, rng);
  AugmentPolicy policy = AugmentPolicy::identity();
  policy.vflip_enabled = true;
  policy.vflip_probability = 1.0;
  std::mt19937_64 state(3);
  const auto out = augment(img, policy, state);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) ASSERT_EQ(out.at(y, x, c), img.at(img.height - 1 - y, x, c));
}

TEST(Augment, OutputStaysInUnitRange) {
  std::mt19937_64 rng(8);
  AugmentPolicy strong;
  strong.brightness = 0.9;
  strong.contrast = 0.9;
  strong.saturation = 0.9;
  strong.hue = 0.5;
  strong.noise_std = 0.3;
  for (int trial = 0; trial < 30; ++trial) {
    const Image img = lftest::random_image(24, 24, rng);
    const auto out = augment(img, strong, rng);
    ASSERT_EQ(out.height, img.height);
    ASSERT_EQ(out.width, img.width);
    for (double v : out.data) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
  }
}

TEST(Augment, EachTransformChangesTheImage) {
  std::mt19937_64 rng(4);
  const Image img = lftest::random_image(24, 24, rng, 0.2, 0.8);
  auto only = [](auto set) {
    AugmentPolicy p = AugmentPolicy::identity();
    set(p);
    return p;
  };
  const std::vector<AugmentPolicy> policies = {
      only([](AugmentPolicy& p) { p.color_enabled = true; }),
      only([](AugmentPolicy& p) { p.rotation_enabled = true; }),
      only([](AugmentPolicy& p) { p.translation_enabled = true; }),
      only([](AugmentPolicy& p) { p.scale_enabled = true; }),
      only([](AugmentPolicy& p) { p.shear_enabled = true; }),
      only([](AugmentPolicy& p) { p.noise_enabled = true; }),
      only([](AugmentPolicy& p) {
        p.blur_enabled = true;
        p.blur_min = 0.8;
      }),
  };
  for (std::size_t i = 0; i < policies.size(); ++i) {
    std::mt19937_64 state(10 + i);
    EXPECT_NE(augment(img, policies[i], state), img) << "transform " << i;
  }
}

TEST(Augment, ValidateRejectsBadRanges) {
  AugmentPolicy p;
  p.scale_min = 1.3;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = AugmentPolicy{};
  p.hflip_probability = 1.5;
  EXPECT_THROW(p.validate(), InvalidArgument);
  p = AugmentPolicy{};
  p.blur_min = 2.0;
  EXPECT_THROW(p.validate(), InvalidArgument);
  EXPECT_NO_THROW(AugmentPolicy{}.validate());
  EXPECT_FALSE(AugmentPolicy::identity().any_enabled());
}

TEST(Standardize, IdentityParameters) {
  std::mt19937_64 rng(1);
  const Image img = lftest::random_image(16, 16, rng);
  EXPECT_EQ(standardize(img, 16, {0, 0, 0}, {1, 1, 1}), img);
}

TEST(Standardize, ConstantImageCentersToZero) {
  const Image img(10, 7, 0.3);
  const auto out = standardize(img, 12, {0.3, 0.3, 0.3}, {1, 1, 1});
  for (double v : out.data) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Standardize, BilinearMatchesOracle) {
  Image board(2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) board.at(y, x, c) = ((x + y) % 2 == 0 ? 1.0 : 0.0) * (0.5 + 0.25 * c);
  const auto out = standardize(board, 4, {0, 0, 0}, {1, 1, 1});
  // Reference: half-pixel centres, edge samples clamped.
  auto sample = [&](double sy, double sx, int c) {
    sy = std::clamp(sy, 0.0, 1.0);
    sx = std::clamp(sx, 0.0, 1.0);
    const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
    const int y1 = std::min(y0 + 1, 1), x1 = std::min(x0 + 1, 1);
    const double fy = sy - y0, fx = sx - x0;
    return (1 - fy) * ((1 - fx) * board.at(y0, x0, c) + fx * board.at(y0, x1, c)) +
           fy * ((1 - fx) * board.at(y1, x0, c) + fx * board.at(y1, x1, c));
  };
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c)
        EXPECT_NEAR(out.at(y, x, c), sample((y + 0.5) * 0.5 - 0.5, (x + 0.5) * 0.5 - 0.5, c), 1e-6);
}

TEST(Standardize, RejectsDegenerateInput) {
  EXPECT_THROW(standardize(Image(), 4, {0, 0, 0}, {1, 1, 1}), InvalidArgument);
  EXPECT_THROW(standardize(Image(2, 2), 4, {0, 0, 0}, {0, 1, 1}), InvalidArgument);
}

TEST(ImageIo, PngRoundTripWithinQuantization) {
  lftest::TempDir dir;
  std::mt19937_64 rng(6);
  const Image img = lftest::random_image(11, 17, rng);
  write_image(dir / "a.png", img);
  const Image back = read_image(dir / "a.png");
  ASSERT_EQ(back.height, 11);
  ASSERT_EQ(back.width, 17);
  EXPECT_LE(max_abs_diff(back, img), 0.5 / 255.0 + 1e-12);
  EXPECT_THROW(read_image(dir / "missing.png"), Error);
}
