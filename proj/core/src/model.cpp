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

#include "lesionfuse/model.hpp"

#include <fmt/format.h>

#include "lesionfuse/error.hpp"
#include "lesionfuse/nn/archive.hpp"

namespace lesionfuse {

LesionModel::LesionModel(std::unique_ptr<FeatureExtractor> backbone, const HeadSpec& head,
                         std::mt19937_64& rng)
    : backbone_(std::move(backbone)), head_(head, rng) {
  if (backbone_->spec().feature_dim != head.backbone_dim())
    throw InvalidArgument(fmt::format("model: backbone emits {} features but the head expects {}",
                                      backbone_->spec().feature_dim, head.backbone_dim()));
}

nn::Tensor LesionModel::features(const nn::Tensor& image, nn::RunContext& ctx) {
  return backbone_->features(image, ctx);
}

nn::Tensor LesionModel::logits_from_features(const nn::Tensor& features,
                                             const ClinicalVector& clinical, nn::RunContext& ctx) {
  return head_.logits(features, fused() ? &clinical : nullptr, ctx);
}

nn::Tensor LesionModel::predict(const nn::Tensor& image, const ClinicalVector& clinical) {
  nn::RunContext ctx;
  ctx.record = false;
  return nn::softmax(logits_from_features(features(image, ctx), clinical, ctx));
}

void LesionModel::backward(const nn::Tensor& grad_logits) {
  const nn::Tensor g = head_.backward(grad_logits);
  if (backbone_->spec().trainable) backbone_->backward(g);
}

nn::ParameterList LesionModel::parameters() {
  auto params = backbone_->parameters("backbone.");
  auto head = head_.parameters("head.");
  params.insert(params.end(), head.begin(), head.end());
  return params;
}

std::vector<nn::Tensor> LesionModel::snapshot() {
  std::vector<nn::Tensor> out;
  for (const auto& [name, p] : parameters()) out.push_back(p->value);
  return out;
}

void LesionModel::restore(const std::vector<nn::Tensor>& values) {
  auto params = parameters();
  if (params.size() != values.size()) throw InvalidArgument("model: snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i].param->value = values[i];
}

nn::Tensor to_chw(const Image& image) {
  nn::Tensor t({3, image.height, image.width});
  const std::size_t area = image.pixels();
  for (std::size_t i = 0; i < area; ++i)
    for (std::size_t c = 0; c < 3; ++c) t[c * area + i] = image.data[i * 3 + c];
  return t;
}

std::unique_ptr<LesionModel> make_model(BackboneName backbone, Scenario scenario, double cf,
                                        bool pretrained, std::uint64_t seed, double dropout) {
  FusionConfig fc;
  fc.cf = cf;
  fc.backbone_dim = feature_dim(backbone);
  fc.scenario = scenario;
  fc.dropout = dropout;
  if (needs_intermediate_reducer(backbone)) fc.vgg_intermediate = kVggIntermediate;
  const HeadSpec head = build_head(fc);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return std::make_unique<LesionModel>(create_extractor(backbone, pretrained, seed), head, rng);
}

// ---------------------------------------------------------------- SampleStore

SampleStore::SampleStore(const DatasetManifest& manifest, ImageOptions options)
    : options_(std::move(options)) {
  if (options_.side <= 0) throw InvalidArgument("sample store: image side must be positive");
  for (const auto& r : manifest.records) {
    paths_.push_back(manifest.image_file(r));
    clinical_.push_back(encode_clinical(r, options_.age_scale));
    labels_.push_back(r.diagnosis);
  }
  if (options_.cache) {
    cache_.reserve(paths_.size());
    for (std::size_t i = 0; i < paths_.size(); ++i) cache_.push_back(load(i));
  }
}

SampleStore::SampleStore(std::vector<Image> images, std::vector<ClinicalRecord> records,
                         ImageOptions options)
    : options_(std::move(options)) {
  if (images.size() != records.size())
    throw InvalidArgument("sample store: image and record counts differ");
  for (std::size_t i = 0; i < images.size(); ++i) {
    Image img = images[i];
    if (options_.color_constancy) img = shades_of_gray(img, *options_.color_constancy).image;
    if (img.height != options_.side || img.width != options_.side)
      img = standardize(img, options_.side, {0, 0, 0}, {1, 1, 1});
    cache_.push_back(std::move(img));
    clinical_.push_back(encode_clinical(records[i], options_.age_scale));
    labels_.push_back(records[i].diagnosis);
  }
  options_.cache = true;
}

Image SampleStore::load(std::size_t i) const {
  Image img = read_image(paths_.at(i));
  if (options_.color_constancy) img = shades_of_gray(img, *options_.color_constancy).image;
  if (img.height != options_.side || img.width != options_.side)
    img = standardize(img, options_.side, {0, 0, 0}, {1, 1, 1});
  return img;
}

Image SampleStore::image(std::size_t i) const {
  if (!cache_.empty()) return cache_.at(i);
  return load(i);
}

LabelHistogram SampleStore::histogram(std::span<const std::size_t> indices) const {
  LabelHistogram h{};
  for (auto i : indices) ++h[index_of(labels_.at(i))];
  return h;
}

nn::Tensor SampleStore::network_input(const Image& image) const {
  return to_chw(standardize(image, options_.side, options_.mean, options_.std));
}

// ---------------------------------------------------------------- checkpoints

namespace {

nlohmann::json image_options_json(const ImageOptions& o) {
  nlohmann::json j = {{"side", o.side}, {"age_scale", o.age_scale}, {"mean", o.mean}, {"std", o.std}};
  if (o.color_constancy) j["color_constancy_p"] = o.color_constancy->p;
  return j;
}

ImageOptions image_options_from(const nlohmann::json& j) {
  ImageOptions o;
  o.side = j.at("side").get<int>();
  o.age_scale = j.at("age_scale").get<double>();
  o.mean = j.at("mean").get<std::array<double, 3>>();
  o.std = j.at("std").get<std::array<double, 3>>();
  if (j.contains("color_constancy_p")) {
    ColorConstancyConfig cc;
    cc.p = j.at("color_constancy_p").get<double>();
    o.color_constancy = cc;
  }
  return o;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, LesionModel& model,
                     const CheckpointInfo& info) {
  nn::TensorArchive archive;
  archive.meta = {{"kind", "lesionfuse-checkpoint"},
                  {"backbone", std::string(to_string(info.backbone))},
                  {"head", to_json(info.head)},
                  {"train_config", info.train_config},
                  {"fold_index", info.fold_index},
                  {"folds", info.folds},
                  {"seed", info.seed},
                  {"group_by_patient", info.group_by_patient},
                  {"image", image_options_json(info.image)}};
  nn::store_parameters(model.parameters(), archive);
  nn::save_archive(path, archive);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  auto archive = nn::load_archive(path);
  const auto& m = archive.meta;
  if (m.value("kind", "") != "lesionfuse-checkpoint")
    throw FormatError(fmt::format("'{}' is not a lesionfuse checkpoint", path.string()));
  LoadedCheckpoint out;
  try {
    const auto backbone = parse_backbone(m.at("backbone").get<std::string>());
    if (!backbone) throw FormatError("checkpoint names an unknown backbone");
    out.info.backbone = *backbone;
    out.info.head = head_from_json(m.at("head"));
    out.info.train_config = m.at("train_config");
    out.info.fold_index = m.at("fold_index").get<std::size_t>();
    out.info.folds = m.at("folds").get<std::size_t>();
    out.info.seed = m.at("seed").get<std::uint64_t>();
    out.info.group_by_patient = m.at("group_by_patient").get<bool>();
    out.info.image = image_options_from(m.at("image"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("'{}': bad checkpoint metadata: {}", path.string(), e.what()));
  }
  std::mt19937_64 rng(0);
  out.model = std::make_unique<LesionModel>(create_extractor(out.info.backbone, false, 0),
                                            out.info.head, rng);
  nn::restore_parameters(out.model->parameters(), archive);
  return out;
}

}  // namespace lesionfuse
