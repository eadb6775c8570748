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

// Registry of convolutional feature extractors.
//
// Parameter names follow the torchvision state_dict keys of the matching
// classification models, so published weights convert one-to-one into the
// tensor archive looked up under $LESIONFUSE_CACHE/<name>.lfw.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "lesionfuse/nn/layers.hpp"

namespace lesionfuse {

enum class BackboneName { resnet50, resnet101, googlenet, vgg13bn, vgg19bn, mobilenet, tiny };

inline constexpr std::array<BackboneName, 7> kAllBackbones = {
    BackboneName::resnet50, BackboneName::resnet101, BackboneName::googlenet,
    BackboneName::vgg13bn,  BackboneName::vgg19bn,   BackboneName::mobilenet,
    BackboneName::tiny};

std::string_view to_string(BackboneName name);
std::optional<BackboneName> parse_backbone(std::string_view text);
/// Width of the flattened final feature map.
int feature_dim(BackboneName name);
/// Whether the head gets the 1024-wide intermediate reducer layer.
bool needs_intermediate_reducer(BackboneName name);
/// The tiny extractor exists for desk-scale runs only.
bool is_test_backbone(BackboneName name);

struct BackboneSpec {
  BackboneName name = BackboneName::tiny;
  int feature_dim = 0;
  bool pretrained = false;
  bool trainable = true;
};

class FeatureExtractor {
 public:
  FeatureExtractor(BackboneSpec spec, std::unique_ptr<nn::Sequential> net);

  const BackboneSpec& spec() const { return spec_; }

  /// Flattened final feature map for one standardized (3, H, W) image.
  nn::Tensor features(const nn::Tensor& image, nn::RunContext& ctx);
  /// Back-propagates dL/dfeatures, accumulating gradients of trainable
  /// parameters.
  void backward(const nn::Tensor& grad_features);

  nn::ParameterList parameters(const std::string& prefix = "");
  void set_trainable(bool flag);

 private:
  BackboneSpec spec_;
  std::unique_ptr<nn::Sequential> net_;
};

/// $LESIONFUSE_CACHE, else $HOME/.cache/lesionfuse.
std::filesystem::path weights_cache_dir();
std::filesystem::path weights_file(BackboneName name);

/// Builds a registered extractor. Weights are randomly initialized from `seed`
/// unless `pretrained` is set, in which case the cached archive is loaded and
/// a missing archive raises an Error with instructions.
std::unique_ptr<FeatureExtractor> create_extractor(std::string_view name, bool pretrained,
                                                   std::uint64_t seed = 0);
std::unique_ptr<FeatureExtractor> create_extractor(BackboneName name, bool pretrained,
                                                   std::uint64_t seed = 0);

void set_trainable(FeatureExtractor& extractor, bool flag);

}  // namespace lesionfuse
