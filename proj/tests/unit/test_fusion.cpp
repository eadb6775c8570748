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

#include <cmath>

#include "lesionfuse/backbones.hpp"
#include "lesionfuse/error.hpp"
#include "lesionfuse/fusion.hpp"
#include "test_util.hpp"

using namespace lesionfuse;

namespace {

nn::Tensor random_features(int n, std::mt19937_64& rng) {
  nn::Tensor t({n});
  std::normal_distribution<double> d(0.0, 1.0);
  for (auto& v : t.data) v = d(rng);
  return t;
}

ClinicalVector random_clinical(std::mt19937_64& rng) {
  return encode_clinical(lftest::random_record(rng));
}

}  // namespace

TEST(FusionArithmetic, FeatureCountTable) {
  struct Row {
    double cf;
    int img, total;
  };
  for (const Row& r : {Row{0.5, 28, 56}, Row{0.6, 42, 70}, Row{0.7, 66, 94}, Row{0.8, 112, 140},
                       Row{0.9, 252, 280}}) {
    EXPECT_EQ(reduced_image_features(28, r.cf), r.img) << r.cf;
    EXPECT_EQ(total_features(28, r.cf), r.total) << r.cf;
  }
}

TEST(FusionArithmetic, MatchesCeilingOracle) {
  // Oracle: exact rational ceil(n c / (1 - c)) with c = a / 100.
  for (int n = 1; n <= 60; ++n)
    for (int a = 1; a < 100; ++a) {
      const double cf = a / 100.0;
      const long num = static_cast<long>(n) * a, den = 100 - a;
      const long expected = (num + den - 1) / den;
      EXPECT_EQ(reduced_image_features(n, cf), expected) << n << " " << cf;
      const long t = (static_cast<long>(n) * 100 + den - 1) / den;
      EXPECT_EQ(total_features(n, cf), t) << n << " " << cf;
    }
}

TEST(FusionArithmetic, Errors) {
  try {
    reduced_image_features(28, 0.0);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("reducer width must be positive"), std::string::npos);
  }
  EXPECT_THROW(reduced_image_features(28, 1.0), InvalidArgument);
  EXPECT_THROW(reduced_image_features(28, 1.5), InvalidArgument);
  EXPECT_THROW(reduced_image_features(28, -0.1), InvalidArgument);
  EXPECT_THROW(total_features(28, 1.0), InvalidArgument);
  EXPECT_THROW(reduced_image_features(0, 0.5), InvalidArgument);
}

TEST(FusionArithmetic, MonotoneAndImageShareBounded) {
  for (int n : {1, 5, 28, 40}) {
    int previous = 0;
    for (int a = 1; a < 100; ++a) {
      const double cf = a / 100.0;
      const int img = reduced_image_features(n, cf);
      const int total = total_features(n, cf);
      EXPECT_GE(img, previous);
      previous = img;
      const double share = static_cast<double>(img) / total;
      EXPECT_GE(share, cf - 1e-12);
      EXPECT_LE(share, cf + 1.0 / total + 1e-12);
    }
  }
}

TEST(FusionHeadSpec, ResNetFused) {
  const HeadSpec h = build_head({.cf = 0.8, .backbone_dim = feature_dim(BackboneName::resnet50)});
  EXPECT_EQ(h.reducer, (std::vector<LayerWidth>{{2048, 112}}));
  EXPECT_EQ(h.concat_width, 140);
  EXPECT_EQ(h.clinical_width, 28);
  EXPECT_EQ(h.num_classes, 6);
  EXPECT_DOUBLE_EQ(h.dropout, 0.5);
}

TEST(FusionHeadSpec, VggGetsIntermediateLayer) {
  const HeadSpec h = build_head({.cf = 0.8,
                                 .backbone_dim = feature_dim(BackboneName::vgg13bn),
                                 .vgg_intermediate = kVggIntermediate});
  EXPECT_EQ(h.reducer, (std::vector<LayerWidth>{{25088, 1024}, {1024, 112}}));
  EXPECT_EQ(h.concat_width, 140);
}

TEST(FusionHeadSpec, MobileNetImageOnly) {
  const HeadSpec h = build_head({.cf = 0.8,
                                 .backbone_dim = feature_dim(BackboneName::mobilenet),
                                 .scenario = Scenario::image_only});
  EXPECT_EQ(h.reducer, (std::vector<LayerWidth>{{1024, 112}}));
  EXPECT_EQ(h.concat_width, 112);
  EXPECT_EQ(h.clinical_width, 0);
}

TEST(FusionHeadSpec, InvalidConfigs) {
  EXPECT_THROW(build_head({.cf = 0.8, .backbone_dim = 0}), InvalidArgument);
  EXPECT_THROW(build_head({.cf = 1.0, .backbone_dim = 64}), InvalidArgument);
  EXPECT_THROW(build_head({.cf = 0.8, .backbone_dim = 64, .dropout = 1.0}), InvalidArgument);
  EXPECT_THROW(build_head({.cf = 0.8, .backbone_dim = 64, .vgg_intermediate = 0}), InvalidArgument);
}

TEST(FusionHeadSpec, JsonRoundTrip) {
  const HeadSpec h = build_head({.cf = 0.7, .backbone_dim = 512, .vgg_intermediate = 256});
  EXPECT_EQ(head_from_json(to_json(h)), h);
  auto j = to_json(h);
  j["concat_width"] = 999;
  EXPECT_THROW(head_from_json(j), FormatError);
}

TEST(FusionForward, ProbabilitiesAndDeterminism) {
  std::mt19937_64 rng(3);
  for (Scenario s : {Scenario::fused, Scenario::image_only})
    for (double cf : {0.5, 0.7, 0.9}) {
      FusionHead head(build_head({.cf = cf, .backbone_dim = 64, .scenario = s}), rng);
      for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_features(64, rng);
        const auto c = random_clinical(rng);
        const ClinicalVector* cp = s == Scenario::fused ? &c : nullptr;
        const auto p = fuse_forward(x, cp, head, Mode::eval);
        ASSERT_EQ(p.size(), kNumClasses);
        double sum = 0.0;
        for (double v : p.data) {
          EXPECT_GE(v, 0.0);
          sum += v;
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
        EXPECT_EQ(fuse_forward(x, cp, head, Mode::eval), p);
        std::mt19937_64 drop(trial);
        const auto pt = fuse_forward(x, cp, head, Mode::train, &drop);
        double st = 0.0;
        for (double v : pt.data) st += v;
        EXPECT_NEAR(st, 1.0, 1e-6);
      }
    }
}

TEST(FusionForward, DimensionErrors) {
  std::mt19937_64 rng(4);
  FusionHead fused(build_head({.cf = 0.8, .backbone_dim = 64}), rng);
  FusionHead image(build_head({.cf = 0.8, .backbone_dim = 64, .scenario = Scenario::image_only}), rng);
  const auto c = random_clinical(rng);
  EXPECT_THROW(fuse_forward(random_features(63, rng), &c, fused, Mode::eval), InvalidArgument);
  EXPECT_THROW(fuse_forward(random_features(64, rng), nullptr, fused, Mode::eval), InvalidArgument);
  EXPECT_THROW(fuse_forward(random_features(64, rng), &c, image, Mode::eval), InvalidArgument);
}

TEST(FusionForward, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (Scenario s : {Scenario::fused, Scenario::image_only}) {
    FusionHead head(build_head({.cf = 0.7, .backbone_dim = 40, .scenario = s, .vgg_intermediate = 16}), rng);
    auto x = random_features(40, rng);
    const auto c = random_clinical(rng);
    const ClinicalVector* cp = s == Scenario::fused ? &c : nullptr;
    const std::size_t label = 2;
    auto loss = [&]() {
      nn::RunContext ctx;
      const auto p = nn::softmax(head.logits(x, cp, ctx));
      return -std::log(p[label]);
    };
    auto params = head.parameters();
    for (auto& p : params) p.param->zero_grad();
    nn::RunContext ctx;
    auto p = nn::softmax(head.logits(x, cp, ctx));
    p[label] -= 1.0;  // d(-log softmax)/dlogits
    const auto dx = head.backward(p);

    int checked = 0;
    for (auto& np : params) {
      if (np.name.rfind("reducer", 0) != 0 && np.name.rfind("classifier", 0) != 0) continue;
      for (std::size_t i = 0; i < np.param->value.size(); i += 97) {
        const double numeric = lftest::central_difference(loss, np.param->value.data[i]);
        const double analytic = np.param->grad.data[i];
        if (std::abs(numeric) < 1e-7 && std::abs(analytic) < 1e-7) continue;
        EXPECT_LT(lftest::relative_error(analytic, numeric), 1e-4) << np.name << "[" << i << "]";
        ++checked;
      }
    }
    EXPECT_GT(checked, 10);
    for (std::size_t i = 0; i < x.size(); i += 3) {
      const double numeric = lftest::central_difference(loss, x.data[i]);
      if (std::abs(numeric) < 1e-7 && std::abs(dx[i]) < 1e-7) continue;
      EXPECT_LT(lftest::relative_error(dx[i], numeric), 1e-4) << "feature " << i;
    }
  }
}

TEST(FusionForward, ClinicalSliceMatters) {
  std::mt19937_64 rng(6);
  FusionHead head(build_head({.cf = 0.8, .backbone_dim = 64}), rng);
  const auto x = random_features(64, rng);
  ClinicalVector c = random_clinical(rng);
  const auto with = fuse_forward(x, &c, head, Mode::eval);
  const ClinicalVector zero{};
  EXPECT_NE(fuse_forward(x, &zero, head, Mode::eval), with);

  FusionHead image(build_head({.cf = 0.8, .backbone_dim = 64, .scenario = Scenario::image_only}), rng);
  for (auto& p : image.parameters())
    EXPECT_EQ(p.name.find("clinical"), std::string::npos);
  // Classifier input width equals the reducer output: no slot for clinical data.
  EXPECT_EQ(image.spec().concat_width, image.spec().image_width());
}

TEST(FusionNames, ScenarioParsing) {
  EXPECT_EQ(parse_scenario("fused"), Scenario::fused);
  EXPECT_EQ(parse_scenario("image_only"), Scenario::image_only);
  EXPECT_EQ(to_string(Scenario::image_only), "image_only");
  EXPECT_THROW(parse_scenario("both"), InvalidArgument);
}
