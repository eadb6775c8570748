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

// Layers with explicit backward passes. Every layer processes one sample at a
// time; `forward` records what `backward` needs when RunContext::record is
// set, and `backward` accumulates parameter gradients into Parameter::grad.

#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lesionfuse/nn/tensor.hpp"

namespace lesionfuse::nn {

struct Parameter {
  Tensor value;
  Tensor grad;
  bool trainable = true;
  /// Persistent state (e.g. running statistics) that the optimizer never
  /// updates but checkpoints keep.
  bool buffer = false;

  explicit Parameter(Tensor v, bool is_buffer = false)
      : value(std::move(v)), grad(value.shape), buffer(is_buffer) {}
  void zero_grad() { grad.fill(0.0); }
  bool wants_grad() const { return trainable && !buffer; }
};

struct NamedParameter {
  std::string name;
  Parameter* param;
};
using ParameterList = std::vector<NamedParameter>;

struct RunContext {
  bool training = false;
  bool record = true;
  std::mt19937_64* rng = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& input, RunContext& ctx) = 0;
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual void collect_parameters(const std::string& prefix, ParameterList& out);
};

using LayerPtr = std::unique_ptr<Layer>;

class Linear final : public Layer {
 public:
  Linear(int in_features, int out_features, std::mt19937_64& rng, bool bias = true);
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, ParameterList& out) override;

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int in_;
  int out_;
  bool has_bias_;
  Parameter weight_;  // (out, in)
  Parameter bias_;    // (out)
  Tensor input_;
};

struct ConvOptions {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 0;
  int groups = 1;
  bool bias = false;
};

class Conv2d final : public Layer {
 public:
  Conv2d(const ConvOptions& options, std::mt19937_64& rng);
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, ParameterList& out) override;

  const ConvOptions& options() const { return opt_; }

 private:
  ConvOptions opt_;
  Parameter weight_;  // (out, in / groups, k, k)
  Parameter bias_;
  Tensor input_;
};

/// Batch normalization evaluated with its running statistics; scale and shift
/// stay trainable.
class BatchNorm2d final : public Layer {
 public:
  explicit BatchNorm2d(int channels, double eps = 1e-5);
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, ParameterList& out) override;

 private:
  int channels_;
  double eps_;
  Parameter weight_;
  Parameter bias_;
  Parameter running_mean_;
  Parameter running_var_;
  Tensor input_;
};

class ReLU final : public Layer {
 public:
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;

 private:
  Tensor output_;
};

class MaxPool2d final : public Layer {
 public:
  MaxPool2d(int kernel, int stride, int padding = 0, bool ceil_mode = false);
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;

 private:
  int kernel_, stride_, padding_;
  bool ceil_mode_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

class AdaptiveAvgPool2d final : public Layer {
 public:
  AdaptiveAvgPool2d(int out_h, int out_w) : out_h_(out_h), out_w_(out_w) {}
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;

 private:
  int out_h_, out_w_;
  Shape input_shape_;
};

class Flatten final : public Layer {
 public:
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;

 private:
  Shape input_shape_;
};

/// Inverted dropout: active only when RunContext::training is set.
class Dropout final : public Layer {
 public:
  explicit Dropout(double p);
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;

  double rate() const { return p_; }

 private:
  double p_;
  std::vector<double> mask_;
};

class Sequential final : public Layer {
 public:
  Sequential() = default;
  Sequential& add(std::string name, LayerPtr layer);
  template <typename L, typename... Args>
  L& emplace(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(name), std::move(layer));
    return ref;
  }

  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, ParameterList& out) override;

  std::size_t size() const { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i).second; }

 private:
  std::vector<std::pair<std::string, LayerPtr>> layers_;
};

/// relu(body(x) + shortcut(x)); an absent shortcut is the identity. Shortcut
/// parameters are named under "downsample.".
class Residual final : public Layer {
 public:
  Residual(std::unique_ptr<Sequential> body, std::unique_ptr<Sequential> shortcut);
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, ParameterList& out) override;

 private:
  std::unique_ptr<Sequential> body_;
  std::unique_ptr<Sequential> shortcut_;
  Tensor output_;
};

/// Runs every branch on the same input and concatenates along channels.
class Concat final : public Layer {
 public:
  Concat& add(std::string name, LayerPtr branch);
  Tensor forward(const Tensor& input, RunContext& ctx) override;
  Tensor backward(const Tensor& grad_output) override;
  void collect_parameters(const std::string& prefix, ParameterList& out) override;

 private:
  std::vector<std::pair<std::string, LayerPtr>> branches_;
  std::vector<int> channels_;
};

/// Softmax of a logit vector, numerically stabilized.
Tensor softmax(const Tensor& logits);

ParameterList parameters_of(Layer& layer, const std::string& prefix = "");

}  // namespace lesionfuse::nn
