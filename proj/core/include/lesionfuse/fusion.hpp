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

// Combination-factor arithmetic and the reducer/classifier head.
//
// With n_cli clinical features and combination factor c_f, the classifier
// sees T = ceil(n_cli / (1 - c_f)) inputs, of which
// N_img = ceil(n_cli / (1 - c_f) - n_cli) come from the image reducer.

#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesionfuse/data_model.hpp"
#include "lesionfuse/nn/layers.hpp"

namespace lesionfuse {

enum class Scenario { image_only, fused };

std::string_view to_string(Scenario s);
Scenario parse_scenario(std::string_view text);

/// Width of the image reducer output. Throws InvalidArgument for c_f outside
/// [0, 1) or a non-positive result.
int reduced_image_features(int n_cli, double cf);

/// Classifier input width for the fused head: reduced_image_features + n_cli.
int total_features(int n_cli, double cf);

inline constexpr int kVggIntermediate = 1024;
inline constexpr double kHeadDropout = 0.5;

struct FusionConfig {
  double cf = 0.8;
  int n_cli = static_cast<int>(kClinicalFeatures);
  int backbone_dim = 0;
  Scenario scenario = Scenario::fused;
  double dropout = kHeadDropout;
  std::optional<int> vgg_intermediate;
};

struct LayerWidth {
  int in = 0;
  int out = 0;
  bool operator==(const LayerWidth&) const = default;
};

struct HeadSpec {
  /// Affine layers, each followed by ReLU and dropout.
  std::vector<LayerWidth> reducer;
  double dropout = kHeadDropout;
  /// Clinical slice width appended after the reducer; zero when image-only.
  int clinical_width = 0;
  int concat_width = 0;
  int num_classes = static_cast<int>(kNumClasses);
  Scenario scenario = Scenario::fused;
  double cf = 0.8;

  int backbone_dim() const { return reducer.front().in; }
  int image_width() const { return reducer.back().out; }
  bool operator==(const HeadSpec&) const = default;
};

HeadSpec build_head(const FusionConfig& config);

nlohmann::json to_json(const HeadSpec& spec);
HeadSpec head_from_json(const nlohmann::json& j);

/// The trainable head: reducer -> concat(clinical) -> single affine
/// classifier. Parameter names: "reducer.<i>.weight", "classifier.weight".
class FusionHead {
 public:
  FusionHead(HeadSpec spec, std::mt19937_64& rng);

  const HeadSpec& spec() const { return spec_; }

  /// Class logits. `clinical` must be present exactly when the head is fused.
  nn::Tensor logits(const nn::Tensor& image_features, const ClinicalVector* clinical,
                    nn::RunContext& ctx);
  /// Back-propagates dL/dlogits; returns dL/dimage_features.
  nn::Tensor backward(const nn::Tensor& grad_logits);

  nn::ParameterList parameters(const std::string& prefix = "");

 private:
  HeadSpec spec_;
  nn::Sequential reducer_;
  std::unique_ptr<nn::Linear> classifier_;
};

enum class Mode { train, eval };

/// Class probabilities for one sample. Eval mode disables dropout and is
/// deterministic; train mode draws dropout masks from `rng`.
nn::Tensor fuse_forward(const nn::Tensor& image_features, const ClinicalVector* clinical,
                        FusionHead& head, Mode mode, std::mt19937_64* rng = nullptr);

}  // namespace lesionfuse
