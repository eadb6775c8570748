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

#include "lesionfuse/backbones.hpp"

#include <array>
#include <cstdlib>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"
#include "lesionfuse/nn/archive.hpp"
#include "lesionfuse/preprocess.hpp"

namespace lesionfuse {
namespace {

using nn::AdaptiveAvgPool2d;
using nn::BatchNorm2d;
using nn::Concat;
using nn::Conv2d;
using nn::ConvOptions;
using nn::Flatten;
using nn::MaxPool2d;
using nn::ReLU;
using nn::Residual;
using nn::Sequential;

struct Entry {
  BackboneName name;
  std::string_view key;
  int dim;
};

constexpr std::array<Entry, 7> kRegistry = {{
    {BackboneName::resnet50, "resnet50", 2048},
    {BackboneName::resnet101, "resnet101", 2048},
    {BackboneName::googlenet, "googlenet", 1024},
    {BackboneName::vgg13bn, "vgg13bn", 25088},
    {BackboneName::vgg19bn, "vgg19bn", 25088},
    {BackboneName::mobilenet, "mobilenet", 1024},
    {BackboneName::tiny, "tiny", 64},
}};

const Entry& entry(BackboneName name) {
  for (const auto& e : kRegistry)
    if (e.name == name) return e;
  throw InvalidArgument("unknown backbone");
}

ConvOptions conv(int in, int out, int k, int stride = 1, int pad = 0, bool bias = false,
                 int groups = 1) {
  return {in, out, k, stride, pad, groups, bias};
}

// ResNet v1.5 bottleneck: stride on the 3x3 convolution.
std::unique_ptr<Residual> bottleneck(int in, int width, int stride, std::mt19937_64& rng) {
  const int out = width * 4;
  auto body = std::make_unique<Sequential>();
  body->emplace<Conv2d>("conv1", conv(in, width, 1), rng);
  body->emplace<BatchNorm2d>("bn1", width);
  body->emplace<ReLU>("relu1");
  body->emplace<Conv2d>("conv2", conv(width, width, 3, stride, 1), rng);
  body->emplace<BatchNorm2d>("bn2", width);
  body->emplace<ReLU>("relu2");
  body->emplace<Conv2d>("conv3", conv(width, out, 1), rng);
  body->emplace<BatchNorm2d>("bn3", out);
  std::unique_ptr<Sequential> shortcut;
  if (stride != 1 || in != out) {
    shortcut = std::make_unique<Sequential>();
    shortcut->emplace<Conv2d>("0", conv(in, out, 1, stride), rng);
    shortcut->emplace<BatchNorm2d>("1", out);
  }
  return std::make_unique<Residual>(std::move(body), std::move(shortcut));
}

std::unique_ptr<Sequential> resnet(std::array<int, 4> blocks, std::mt19937_64& rng) {
  auto net = std::make_unique<Sequential>();
  net->emplace<Conv2d>("conv1", conv(3, 64, 7, 2, 3), rng);
  net->emplace<BatchNorm2d>("bn1", 64);
  net->emplace<ReLU>("relu");
  net->emplace<MaxPool2d>("maxpool", 3, 2, 1);
  int in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    const int width = 64 << stage;
    auto layer = std::make_unique<Sequential>();
    for (int b = 0; b < blocks[stage]; ++b) {
      const int stride = (b == 0 && stage > 0) ? 2 : 1;
      layer->add(std::to_string(b), bottleneck(in, width, stride, rng));
      in = width * 4;
    }
    net->add(fmt::format("layer{}", stage + 1), std::move(layer));
  }
  net->emplace<AdaptiveAvgPool2d>("avgpool", 1, 1);
  net->emplace<Flatten>("flatten");
  return net;
}

std::unique_ptr<Sequential> vgg_bn(const std::vector<int>& cfg, std::mt19937_64& rng) {
  auto features = std::make_unique<Sequential>();
  int in = 3;
  int index = 0;
  for (int v : cfg) {
    if (v == 0) {
      features->emplace<MaxPool2d>(std::to_string(index++), 2, 2);
      continue;
    }
    features->emplace<Conv2d>(std::to_string(index++), conv(in, v, 3, 1, 1, true), rng);
    features->emplace<BatchNorm2d>(std::to_string(index++), v);
    features->emplace<ReLU>(std::to_string(index++));
    in = v;
  }
  auto net = std::make_unique<Sequential>();
  net->add("features", std::move(features));
  net->emplace<AdaptiveAvgPool2d>("avgpool", 7, 7);
  net->emplace<Flatten>("flatten");
  return net;
}

// conv (no bias) + batch norm (eps 1e-3) + relu, named "conv" / "bn".
std::unique_ptr<Sequential> basic_conv(int in, int out, int k, std::mt19937_64& rng,
                                       int stride = 1, int pad = 0) {
  auto s = std::make_unique<Sequential>();
  s->emplace<Conv2d>("conv", conv(in, out, k, stride, pad), rng);
  s->emplace<BatchNorm2d>("bn", out, 1e-3);
  s->emplace<ReLU>("relu");
  return s;
}

std::unique_ptr<Concat> inception(int in, int c1, int c3r, int c3, int c5r, int c5, int pool,
                                  std::mt19937_64& rng) {
  auto block = std::make_unique<Concat>();
  block->add("branch1", basic_conv(in, c1, 1, rng));
  auto b2 = std::make_unique<Sequential>();
  b2->add("0", basic_conv(in, c3r, 1, rng));
  b2->add("1", basic_conv(c3r, c3, 3, rng, 1, 1));
  block->add("branch2", std::move(b2));
  // The reference implementation uses a 3x3 kernel in the "5x5" branch.
  auto b3 = std::make_unique<Sequential>();
  b3->add("0", basic_conv(in, c5r, 1, rng));
  b3->add("1", basic_conv(c5r, c5, 3, rng, 1, 1));
  block->add("branch3", std::move(b3));
  auto b4 = std::make_unique<Sequential>();
  b4->emplace<MaxPool2d>("0", 3, 1, 1, true);
  b4->add("1", basic_conv(in, pool, 1, rng));
  block->add("branch4", std::move(b4));
  return block;
}

std::unique_ptr<Sequential> googlenet(std::mt19937_64& rng) {
  auto net = std::make_unique<Sequential>();
  net->add("conv1", basic_conv(3, 64, 7, rng, 2, 3));
  net->emplace<MaxPool2d>("maxpool1", 3, 2, 0, true);
  net->add("conv2", basic_conv(64, 64, 1, rng));
  net->add("conv3", basic_conv(64, 192, 3, rng, 1, 1));
  net->emplace<MaxPool2d>("maxpool2", 3, 2, 0, true);
  net->add("inception3a", inception(192, 64, 96, 128, 16, 32, 32, rng));
  net->add("inception3b", inception(256, 128, 128, 192, 32, 96, 64, rng));
  net->emplace<MaxPool2d>("maxpool3", 3, 2, 0, true);
  net->add("inception4a", inception(480, 192, 96, 208, 16, 48, 64, rng));
  net->add("inception4b", inception(512, 160, 112, 224, 24, 64, 64, rng));
  net->add("inception4c", inception(512, 128, 128, 256, 24, 64, 64, rng));
  net->add("inception4d", inception(512, 112, 144, 288, 32, 64, 64, rng));
  net->add("inception4e", inception(528, 256, 160, 320, 32, 128, 128, rng));
  net->emplace<MaxPool2d>("maxpool4", 2, 2, 0, true);
  net->add("inception5a", inception(832, 256, 160, 320, 32, 128, 128, rng));
  net->add("inception5b", inception(832, 384, 192, 384, 48, 128, 128, rng));
  net->emplace<AdaptiveAvgPool2d>("avgpool", 1, 1);
  net->emplace<Flatten>("flatten");
  return net;
}

// MobileNet v1, width multiplier 1.0.
std::unique_ptr<Sequential> mobilenet(std::mt19937_64& rng) {
  auto model = std::make_unique<Sequential>();
  auto stem = std::make_unique<Sequential>();
  stem->emplace<Conv2d>("0", conv(3, 32, 3, 2, 1), rng);
  stem->emplace<BatchNorm2d>("1", 32);
  stem->emplace<ReLU>("2");
  model->add("0", std::move(stem));
  constexpr std::array<std::array<int, 3>, 13> kBlocks = {{{32, 64, 1},
                                                            {64, 128, 2},
                                                            {128, 128, 1},
                                                            {128, 256, 2},
                                                            {256, 256, 1},
                                                            {256, 512, 2},
                                                            {512, 512, 1},
                                                            {512, 512, 1},
                                                            {512, 512, 1},
                                                            {512, 512, 1},
                                                            {512, 512, 1},
                                                            {512, 1024, 2},
                                                            {1024, 1024, 1}}};
  int index = 1;
  for (const auto& [in, out, stride] : kBlocks) {
    auto block = std::make_unique<Sequential>();
    block->emplace<Conv2d>("0", conv(in, in, 3, stride, 1, false, in), rng);
    block->emplace<BatchNorm2d>("1", in);
    block->emplace<ReLU>("2");
    block->emplace<Conv2d>("3", conv(in, out, 1), rng);
    block->emplace<BatchNorm2d>("4", out);
    block->emplace<ReLU>("5");
    model->add(std::to_string(index++), std::move(block));
  }
  auto net = std::make_unique<Sequential>();
  net->add("model", std::move(model));
  net->emplace<AdaptiveAvgPool2d>("avgpool", 1, 1);
  net->emplace<Flatten>("flatten");
  return net;
}

std::unique_ptr<Sequential> tiny(std::mt19937_64& rng) {
  auto net = std::make_unique<Sequential>();
  net->emplace<Conv2d>("conv1", conv(3, 8, 3, 1, 1, true), rng);
  net->emplace<ReLU>("relu1");
  net->emplace<MaxPool2d>("pool1", 2, 2);
  net->emplace<Conv2d>("conv2", conv(8, 16, 3, 1, 1, true), rng);
  net->emplace<ReLU>("relu2");
  net->emplace<MaxPool2d>("pool2", 2, 2);
  net->emplace<Conv2d>("conv3", conv(16, 64, 3, 1, 1, true), rng);
  net->emplace<ReLU>("relu3");
  net->emplace<AdaptiveAvgPool2d>("avgpool", 1, 1);
  net->emplace<Flatten>("flatten");
  return net;
}

std::unique_ptr<Sequential> build(BackboneName name, std::mt19937_64& rng) {
  switch (name) {
    case BackboneName::resnet50: return resnet({3, 4, 6, 3}, rng);
    case BackboneName::resnet101: return resnet({3, 4, 23, 3}, rng);
    case BackboneName::googlenet: return googlenet(rng);
    case BackboneName::vgg13bn:
      return vgg_bn({64, 64, 0, 128, 128, 0, 256, 256, 0, 512, 512, 0, 512, 512, 0}, rng);
    case BackboneName::vgg19bn:
      return vgg_bn({64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0,
                     512, 512, 512, 512, 0},
                    rng);
    case BackboneName::mobilenet: return mobilenet(rng);
    case BackboneName::tiny: return tiny(rng);
  }
  throw InvalidArgument("unknown backbone");
}

}  // namespace

std::string_view to_string(BackboneName name) { return entry(name).key; }

std::optional<BackboneName> parse_backbone(std::string_view text) {
  for (const auto& e : kRegistry)
    if (e.key == text) return e.name;
  return std::nullopt;
}

int feature_dim(BackboneName name) { return entry(name).dim; }

bool needs_intermediate_reducer(BackboneName name) {
  return name == BackboneName::vgg13bn || name == BackboneName::vgg19bn;
}

bool is_test_backbone(BackboneName name) { return name == BackboneName::tiny; }

FeatureExtractor::FeatureExtractor(BackboneSpec spec, std::unique_ptr<nn::Sequential> net)
    : spec_(spec), net_(std::move(net)) {}

nn::Tensor FeatureExtractor::features(const nn::Tensor& image, nn::RunContext& ctx) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw InvalidArgument(fmt::format("{}: expected a (3, H, W) image, got {}",
                                      to_string(spec_.name), nn::shape_string(image.shape)));
  nn::Tensor out;
  if (spec_.name == BackboneName::googlenet && spec_.pretrained) {
    // Published GoogLeNet weights expect inputs scaled to [-1, 1] rather than
    // ImageNet-standardized ones.
    nn::Tensor x = image;
    const std::size_t area = x.size() / 3;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < area; ++i) {
        double& v = x[c * area + i];
        v = v * (kImageNetStd[c] / 0.5) + (kImageNetMean[c] - 0.5) / 0.5;
      }
    out = net_->forward(x, ctx);
  } else {
    out = net_->forward(image, ctx);
  }
  if (static_cast<int>(out.size()) != spec_.feature_dim)
    throw InvalidArgument(fmt::format("{}: produced {} features, expected {}",
                                      to_string(spec_.name), out.size(), spec_.feature_dim));
  return out;
}

void FeatureExtractor::backward(const nn::Tensor& grad_features) { net_->backward(grad_features); }

nn::ParameterList FeatureExtractor::parameters(const std::string& prefix) {
  return nn::parameters_of(*net_, prefix);
}

void FeatureExtractor::set_trainable(bool flag) {
  for (auto& [name, p] : parameters()) p->trainable = flag;
  spec_.trainable = flag;
}

std::filesystem::path weights_cache_dir() {
  if (const char* env = std::getenv("LESIONFUSE_CACHE"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::filesystem::path(home) / ".cache" / "lesionfuse";
  return std::filesystem::path(".lesionfuse-cache");
}

std::filesystem::path weights_file(BackboneName name) {
  return weights_cache_dir() / fmt::format("{}.lfw", to_string(name));
}

std::unique_ptr<FeatureExtractor> create_extractor(BackboneName name, bool pretrained,
                                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BackboneSpec spec{name, feature_dim(name), pretrained, true};
  auto extractor = std::make_unique<FeatureExtractor>(spec, build(name, rng));
  if (pretrained) {
    const auto file = weights_file(name);
    if (!std::filesystem::exists(file))
      throw Error(fmt::format(
          "pretrained weights for '{}' not found at '{}'. Convert them with "
          "`python3 tools/export_torchvision_weights.py {} --out {}` or point "
          "LESIONFUSE_CACHE at a directory containing {}.lfw",
          to_string(name), file.string(), to_string(name), weights_cache_dir().string(),
          to_string(name)));
    nn::restore_parameters(extractor->parameters(), nn::load_archive(file));
  }
  return extractor;
}

std::unique_ptr<FeatureExtractor> create_extractor(std::string_view name, bool pretrained,
                                                   std::uint64_t seed) {
  const auto parsed = parse_backbone(name);
  if (!parsed)
    throw InvalidArgument(fmt::format(
        "unknown backbone '{}' (registered: resnet50, resnet101, googlenet, vgg13bn, vgg19bn, "
        "mobilenet, tiny)",
        name));
  return create_extractor(*parsed, pretrained, seed);
}

void set_trainable(FeatureExtractor& extractor, bool flag) { extractor.set_trainable(flag); }

}  // namespace lesionfuse
