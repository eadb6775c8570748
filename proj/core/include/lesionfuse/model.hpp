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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesionfuse/backbones.hpp"
#include "lesionfuse/data_model.hpp"
#include "lesionfuse/fusion.hpp"
#include "lesionfuse/image.hpp"
#include "lesionfuse/preprocess.hpp"

namespace lesionfuse {

/// Feature extractor followed by the fusion head.
class LesionModel {
 public:
  LesionModel(std::unique_ptr<FeatureExtractor> backbone, const HeadSpec& head,
              std::mt19937_64& rng);

  FeatureExtractor& backbone() { return *backbone_; }
  FusionHead& head() { return head_; }
  bool fused() const { return head_.spec().clinical_width > 0; }

  nn::Tensor features(const nn::Tensor& image, nn::RunContext& ctx);
  nn::Tensor logits_from_features(const nn::Tensor& features, const ClinicalVector& clinical,
                                  nn::RunContext& ctx);
  /// Probabilities for one standardized (3, H, W) image, eval mode.
  nn::Tensor predict(const nn::Tensor& image, const ClinicalVector& clinical);

  /// Back-propagates dL/dlogits through the head and, when it is trainable,
  /// the backbone.
  void backward(const nn::Tensor& grad_logits);

  /// "backbone.*" and "head.*" parameters.
  nn::ParameterList parameters();
  std::vector<nn::Tensor> snapshot();
  void restore(const std::vector<nn::Tensor>& values);

 private:
  std::unique_ptr<FeatureExtractor> backbone_;
  FusionHead head_;
};

nn::Tensor to_chw(const Image& image);

/// Builds the model for a backbone/scenario/c_f cell with the head shape the
/// registry prescribes.
std::unique_ptr<LesionModel> make_model(BackboneName backbone, Scenario scenario, double cf,
                                        bool pretrained, std::uint64_t seed,
                                        double dropout = kHeadDropout);

struct ImageOptions {
  int side = 224;
  double age_scale = kDefaultAgeScale;
  /// Applied at load time when set.
  std::optional<ColorConstancyConfig> color_constancy;
  std::array<double, 3> mean = kImageNetMean;
  std::array<double, 3> std = kImageNetStd;
  /// Keep resized images in memory instead of decoding on every access.
  bool cache = true;
};

/// Indexed access to the images, clinical vectors and labels of a manifest.
/// Images come back resized to side x side with values in [0, 1].
class SampleStore {
 public:
  SampleStore(const DatasetManifest& manifest, ImageOptions options);
  /// In-memory samples, mainly for tests. Images are resized on construction.
  SampleStore(std::vector<Image> images, std::vector<ClinicalRecord> records,
              ImageOptions options);

  std::size_t size() const { return labels_.size(); }
  Image image(std::size_t i) const;
  const ClinicalVector& clinical(std::size_t i) const { return clinical_.at(i); }
  Diagnosis label(std::size_t i) const { return labels_.at(i); }
  const ImageOptions& options() const { return options_; }
  LabelHistogram histogram(std::span<const std::size_t> indices) const;

  /// Standardized network input for an (optionally augmented) image.
  nn::Tensor network_input(const Image& image) const;

 private:
  Image load(std::size_t i) const;

  ImageOptions options_;
  std::vector<std::filesystem::path> paths_;
  std::vector<ClinicalVector> clinical_;
  std::vector<Diagnosis> labels_;
  std::vector<Image> cache_;
};

struct CheckpointInfo {
  BackboneName backbone = BackboneName::tiny;
  HeadSpec head;
  nlohmann::json train_config = nlohmann::json::object();
  std::size_t fold_index = 0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  bool group_by_patient = true;
  ImageOptions image;
};

/// Parameter store + head spec + training config + fold + seed in one tensor
/// archive.
void save_checkpoint(const std::filesystem::path& path, LesionModel& model,
                     const CheckpointInfo& info);

struct LoadedCheckpoint {
  std::unique_ptr<LesionModel> model;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lesionfuse
