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

#include "lesionfuse/fusion.hpp"

#include <cmath>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse {
namespace {

// c_f values such as 0.8 or 0.9 are not exact in binary, which pushes
// n_cli / (1 - c_f) a few ulps above the intended integer. Values within a
// relative 1e-9 of an integer are snapped before taking the ceiling.
int tolerant_ceil(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<int>(r);
  return static_cast<int>(std::ceil(x));
}

void check_factor(int n_cli, double cf) {
  if (n_cli <= 0) throw InvalidArgument("fusion: n_cli must be positive");
  if (!(cf >= 0.0) || !(cf < 1.0))
    throw InvalidArgument(fmt::format("fusion: combination factor {} must lie in [0, 1)", cf));
}

}  // namespace

std::string_view to_string(Scenario s) { return s == Scenario::fused ? "fused" : "image_only"; }

Scenario parse_scenario(std::string_view text) {
  if (text == "fused") return Scenario::fused;
  if (text == "image_only") return Scenario::image_only;
  throw InvalidArgument(fmt::format("unknown scenario '{}' (expected image_only or fused)", text));
}

int reduced_image_features(int n_cli, double cf) {
  check_factor(n_cli, cf);
  const int width = tolerant_ceil(static_cast<double>(n_cli) / (1.0 - cf) - n_cli);
  if (width <= 0)
    throw InvalidArgument(fmt::format("fusion: reducer width must be positive (c_f = {})", cf));
  return width;
}

int total_features(int n_cli, double cf) { return reduced_image_features(n_cli, cf) + n_cli; }

HeadSpec build_head(const FusionConfig& config) {
  if (config.backbone_dim <= 0) throw InvalidArgument("build_head: backbone_dim must be positive");
  if (config.dropout < 0.0 || config.dropout >= 1.0)
    throw InvalidArgument("build_head: dropout must lie in [0, 1)");
  if (config.vgg_intermediate && *config.vgg_intermediate <= 0)
    throw InvalidArgument("build_head: intermediate width must be positive");

  // Both scenarios size the reducer with the same (n_cli, c_f) arithmetic.
  const int n_img = reduced_image_features(config.n_cli, config.cf);
  HeadSpec spec;
  spec.dropout = config.dropout;
  spec.scenario = config.scenario;
  spec.cf = config.cf;
  if (config.vgg_intermediate) {
    spec.reducer.push_back({config.backbone_dim, *config.vgg_intermediate});
    spec.reducer.push_back({*config.vgg_intermediate, n_img});
  } else {
    spec.reducer.push_back({config.backbone_dim, n_img});
  }
  spec.clinical_width = config.scenario == Scenario::fused ? config.n_cli : 0;
  spec.concat_width = n_img + spec.clinical_width;
  return spec;
}

nlohmann::json to_json(const HeadSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.reducer) layers.push_back({l.in, l.out});
  return {{"reducer", layers},          {"dropout", spec.dropout},
          {"clinical_width", spec.clinical_width}, {"concat_width", spec.concat_width},
          {"num_classes", spec.num_classes}, {"scenario", std::string(to_string(spec.scenario))},
          {"cf", spec.cf}};
}

HeadSpec head_from_json(const nlohmann::json& j) {
  HeadSpec spec;
  for (const auto& l : j.at("reducer")) spec.reducer.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
  spec.dropout = j.at("dropout").get<double>();
  spec.clinical_width = j.at("clinical_width").get<int>();
  spec.concat_width = j.at("concat_width").get<int>();
  spec.num_classes = j.at("num_classes").get<int>();
  spec.scenario = parse_scenario(j.at("scenario").get<std::string>());
  spec.cf = j.at("cf").get<double>();
  if (spec.reducer.empty() || spec.concat_width != spec.image_width() + spec.clinical_width)
    throw FormatError("head spec: inconsistent layer widths");
  for (std::size_t i = 1; i < spec.reducer.size(); ++i)
    if (spec.reducer[i].in != spec.reducer[i - 1].out)
      throw FormatError("head spec: reducer layers do not chain");
  return spec;
}

FusionHead::FusionHead(HeadSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
  if (spec_.reducer.empty()) throw InvalidArgument("FusionHead: empty reducer");
  if (spec_.concat_width != spec_.image_width() + spec_.clinical_width)
    throw InvalidArgument("FusionHead: concat width does not match reducer and clinical widths");
  int index = 0;
  for (const auto& l : spec_.reducer) {
    reducer_.emplace<nn::Linear>(std::to_string(index++), l.in, l.out, rng);
    reducer_.emplace<nn::ReLU>(std::to_string(index++));
    reducer_.emplace<nn::Dropout>(std::to_string(index++), spec_.dropout);
  }
  classifier_ = std::make_unique<nn::Linear>(spec_.concat_width, spec_.num_classes, rng);
}

nn::Tensor FusionHead::logits(const nn::Tensor& image_features, const ClinicalVector* clinical,
                              nn::RunContext& ctx) {
  if (static_cast<int>(image_features.size()) != spec_.backbone_dim())
    throw InvalidArgument(fmt::format("fuse_forward: expected {} image features, got {}",
                                      spec_.backbone_dim(), image_features.size()));
  const bool fused = spec_.clinical_width > 0;
  if (fused != (clinical != nullptr))
    throw InvalidArgument(fused ? "fuse_forward: fused head requires clinical features"
                                : "fuse_forward: image-only head takes no clinical features");
  if (fused && spec_.clinical_width != static_cast<int>(kClinicalFeatures))
    throw InvalidArgument("fuse_forward: clinical width mismatch");

  const nn::Tensor reduced = reducer_.forward(image_features.reshaped({static_cast<int>(image_features.size())}), ctx);
  nn::Tensor joint({spec_.concat_width});
  std::copy(reduced.data.begin(), reduced.data.end(), joint.data.begin());
  if (fused)
    std::copy(clinical->values.begin(), clinical->values.end(),
              joint.data.begin() + spec_.image_width());
  return classifier_->forward(joint, ctx);
}

nn::Tensor FusionHead::backward(const nn::Tensor& grad_logits) {
  const nn::Tensor g_joint = classifier_->backward(grad_logits);
  nn::Tensor g_reduced({spec_.image_width()});
  std::copy_n(g_joint.data.begin(), g_reduced.size(), g_reduced.data.begin());
  return reducer_.backward(g_reduced);
}

nn::ParameterList FusionHead::parameters(const std::string& prefix) {
  nn::ParameterList out;
  reducer_.collect_parameters(prefix + "reducer.", out);
  classifier_->collect_parameters(prefix + "classifier.", out);
  return out;
}

nn::Tensor fuse_forward(const nn::Tensor& image_features, const ClinicalVector* clinical,
                        FusionHead& head, Mode mode, std::mt19937_64* rng) {
  nn::RunContext ctx;
  ctx.training = mode == Mode::train;
  ctx.record = mode == Mode::train;
  ctx.rng = rng;
  return nn::softmax(head.logits(image_features, clinical, ctx));
}

}  // namespace lesionfuse
