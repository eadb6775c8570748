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

#include "lesionfuse/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse::nn {
namespace {

void expect_rank(const Tensor& t, int rank, const char* layer) {
  if (t.rank() != rank)
    throw InvalidArgument(fmt::format("{}: expected rank-{} input, got shape {}", layer, rank,
                                      shape_string(t.shape)));
}

Tensor uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

int conv_out(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

// Patch matrix of one channel group: rows (c, ky, kx), columns (oy, ox).
RowMatrix im2col(const Tensor& x, int c0, int cg, int k, int s, int p, int oh, int ow) {
  const int h = x.dim(1), w = x.dim(2);
  RowMatrix cols(static_cast<Eigen::Index>(cg) * k * k, static_cast<Eigen::Index>(oh) * ow);
  for (int c = 0; c < cg; ++c) {
    const double* plane = x.data.data() + static_cast<std::size_t>(c0 + c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s - p + ky;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s - p + kx;
            row[oy * ow + ox] =
                (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix] : 0.0;
          }
        }
      }
  }
  return cols;
}

void col2im_add(const RowMatrix& cols, Tensor& gx, int c0, int cg, int k, int s, int p, int oh,
                int ow) {
  const int h = gx.dim(1), w = gx.dim(2);
  for (int c = 0; c < cg; ++c) {
    double* plane = gx.data.data() + static_cast<std::size_t>(c0 + c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* row =
            cols.data() + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < w) plane[iy * w + ix] += row[oy * ow + ox];
          }
        }
      }
  }
}

}  // namespace

void Layer::collect_parameters(const std::string&, ParameterList&) {}

ParameterList parameters_of(Layer& layer, const std::string& prefix) {
  ParameterList out;
  layer.collect_parameters(prefix, out);
  return out;
}

// ---------------------------------------------------------------- Linear

Linear::Linear(int in_features, int out_features, std::mt19937_64& rng, bool bias)
    : in_(in_features),
      out_(out_features),
      has_bias_(bias),
      weight_(Tensor({std::max(out_features, 0), std::max(in_features, 0)})),
      bias_(Tensor({bias ? std::max(out_features, 0) : 0})) {
  if (in_features <= 0 || out_features <= 0)
    throw InvalidArgument(fmt::format("Linear: invalid widths {} -> {}", in_features, out_features));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  weight_ = Parameter(uniform_tensor({out_, in_}, bound, rng));
  if (has_bias_) bias_ = Parameter(uniform_tensor({out_}, bound, rng));
}

Tensor Linear::forward(const Tensor& input, RunContext& ctx) {
  if (static_cast<int>(input.size()) != in_)
    throw InvalidArgument(fmt::format("Linear: expected {} inputs, got {}", in_, input.size()));
  if (ctx.record) input_ = input;
  Tensor out({out_});
  auto y = as_vector(out);
  y.noalias() = as_matrix(weight_.value, out_, in_) * as_vector(input);
  if (has_bias_) y += as_vector(bias_.value);
  return out;
}

Tensor Linear::backward(const Tensor& grad_output) {
  const auto g = as_vector(grad_output);
  if (weight_.wants_grad())
    as_matrix(weight_.grad, out_, in_).noalias() += g * as_vector(input_).transpose();
  if (has_bias_ && bias_.wants_grad()) as_vector(bias_.grad) += g;
  Tensor gx(input_.shape);
  as_vector(gx).noalias() = as_matrix(weight_.value, out_, in_).transpose() * g;
  return gx;
}

void Linear::collect_parameters(const std::string& prefix, ParameterList& out) {
  out.push_back({prefix + "weight", &weight_});
  if (has_bias_) out.push_back({prefix + "bias", &bias_});
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const ConvOptions& options, std::mt19937_64& rng)
    : opt_(options), weight_(Tensor({0})), bias_(Tensor({0})) {
  if (opt_.in_channels <= 0 || opt_.out_channels <= 0 || opt_.kernel <= 0 || opt_.stride <= 0 ||
      opt_.padding < 0 || opt_.groups <= 0 || opt_.in_channels % opt_.groups != 0 ||
      opt_.out_channels % opt_.groups != 0)
    throw InvalidArgument("Conv2d: invalid options");
  const int cg = opt_.in_channels / opt_.groups;
  // He initialization on fan-out, as used for ReLU networks.
  const double fan_out = static_cast<double>(opt_.out_channels / opt_.groups) * opt_.kernel * opt_.kernel;
  weight_ = Parameter(normal_tensor({opt_.out_channels, cg, opt_.kernel, opt_.kernel},
                                    std::sqrt(2.0 / fan_out), rng));
  if (opt_.bias) bias_ = Parameter(Tensor({opt_.out_channels}));
}

Tensor Conv2d::forward(const Tensor& input, RunContext& ctx) {
  expect_rank(input, 3, "Conv2d");
  if (input.dim(0) != opt_.in_channels)
    throw InvalidArgument(fmt::format("Conv2d: expected {} channels, got {}", opt_.in_channels,
                                      input.dim(0)));
  const int k = opt_.kernel, s = opt_.stride, p = opt_.padding;
  const int oh = conv_out(input.dim(1), k, s, p), ow = conv_out(input.dim(2), k, s, p);
  if (oh <= 0 || ow <= 0) throw InvalidArgument("Conv2d: input smaller than kernel");
  if (ctx.record) input_ = input;

  const int cg = opt_.in_channels / opt_.groups;
  const int og = opt_.out_channels / opt_.groups;
  const int patch = cg * k * k;
  const int area = oh * ow;
  Tensor out({opt_.out_channels, oh, ow});
  const bool pointwise = (k == 1 && s == 1 && p == 0);
  for (int g = 0; g < opt_.groups; ++g) {
    ConstMatrixMap wg(weight_.value.data.data() + static_cast<std::size_t>(g) * og * patch, og, patch);
    MatrixMap yg(out.data.data() + static_cast<std::size_t>(g) * og * area, og, area);
    if (pointwise) {
      ConstMatrixMap xg(input.data.data() + static_cast<std::size_t>(g) * cg * area, cg, area);
      yg.noalias() = wg * xg;
    } else {
      yg.noalias() = wg * im2col(input, g * cg, cg, k, s, p, oh, ow);
    }
  }
  if (opt_.bias) {
    MatrixMap y(out.data.data(), opt_.out_channels, area);
    y.colwise() += as_vector(bias_.value);
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_output) {
  const int k = opt_.kernel, s = opt_.stride, p = opt_.padding;
  const int oh = grad_output.dim(1), ow = grad_output.dim(2);
  const int cg = opt_.in_channels / opt_.groups;
  const int og = opt_.out_channels / opt_.groups;
  const int patch = cg * k * k;
  const int area = oh * ow;
  const bool pointwise = (k == 1 && s == 1 && p == 0);
  const bool need_w = weight_.wants_grad();

  Tensor gx(input_.shape);
  for (int g = 0; g < opt_.groups; ++g) {
    ConstMatrixMap wg(weight_.value.data.data() + static_cast<std::size_t>(g) * og * patch, og, patch);
    ConstMatrixMap gy(grad_output.data.data() + static_cast<std::size_t>(g) * og * area, og, area);
    if (pointwise) {
      ConstMatrixMap xg(input_.data.data() + static_cast<std::size_t>(g) * cg * area, cg, area);
      if (need_w) {
        MatrixMap gw(weight_.grad.data.data() + static_cast<std::size_t>(g) * og * patch, og, patch);
        gw.noalias() += gy * xg.transpose();
      }
      MatrixMap gxg(gx.data.data() + static_cast<std::size_t>(g) * cg * area, cg, area);
      gxg.noalias() = wg.transpose() * gy;
    } else {
      if (need_w) {
        const RowMatrix cols = im2col(input_, g * cg, cg, k, s, p, oh, ow);
        MatrixMap gw(weight_.grad.data.data() + static_cast<std::size_t>(g) * og * patch, og, patch);
        gw.noalias() += gy * cols.transpose();
      }
      const RowMatrix gcols = wg.transpose() * gy;
      col2im_add(gcols, gx, g * cg, cg, k, s, p, oh, ow);
    }
  }
  if (opt_.bias && bias_.wants_grad()) {
    ConstMatrixMap gy(grad_output.data.data(), opt_.out_channels, area);
    as_vector(bias_.grad) += gy.rowwise().sum();
  }
  return gx;
}

void Conv2d::collect_parameters(const std::string& prefix, ParameterList& out) {
  out.push_back({prefix + "weight", &weight_});
  if (opt_.bias) out.push_back({prefix + "bias", &bias_});
}

// ---------------------------------------------------------------- BatchNorm2d

BatchNorm2d::BatchNorm2d(int channels, double eps)
    : channels_(channels),
      eps_(eps),
      weight_(Tensor({channels}, 1.0)),
      bias_(Tensor({channels}, 0.0)),
      running_mean_(Tensor({channels}, 0.0), true),
      running_var_(Tensor({channels}, 1.0), true) {}

Tensor BatchNorm2d::forward(const Tensor& input, RunContext& ctx) {
  expect_rank(input, 3, "BatchNorm2d");
  if (input.dim(0) != channels_) throw InvalidArgument("BatchNorm2d: channel mismatch");
  if (ctx.record) input_ = input;
  const std::size_t area = static_cast<std::size_t>(input.dim(1)) * input.dim(2);
  Tensor out(input.shape);
  for (int c = 0; c < channels_; ++c) {
    const double inv = 1.0 / std::sqrt(running_var_.value[c] + eps_);
    const double scale = weight_.value[c] * inv;
    const double shift = bias_.value[c] - running_mean_.value[c] * scale;
    const double* x = input.data.data() + c * area;
    double* y = out.data.data() + c * area;
    for (std::size_t i = 0; i < area; ++i) y[i] = x[i] * scale + shift;
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_output) {
  const std::size_t area = static_cast<std::size_t>(input_.dim(1)) * input_.dim(2);
  Tensor gx(input_.shape);
  for (int c = 0; c < channels_; ++c) {
    const double inv = 1.0 / std::sqrt(running_var_.value[c] + eps_);
    const double mean = running_mean_.value[c];
    const double* x = input_.data.data() + c * area;
    const double* g = grad_output.data.data() + c * area;
    double* out = gx.data.data() + c * area;
    double gsum = 0.0, gxhat = 0.0;
    const double scale = weight_.value[c] * inv;
    for (std::size_t i = 0; i < area; ++i) {
      gsum += g[i];
      gxhat += g[i] * (x[i] - mean) * inv;
      out[i] = g[i] * scale;
    }
    if (weight_.wants_grad()) weight_.grad[c] += gxhat;
    if (bias_.wants_grad()) bias_.grad[c] += gsum;
  }
  return gx;
}

void BatchNorm2d::collect_parameters(const std::string& prefix, ParameterList& out) {
  out.push_back({prefix + "weight", &weight_});
  out.push_back({prefix + "bias", &bias_});
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

// ---------------------------------------------------------------- ReLU

Tensor ReLU::forward(const Tensor& input, RunContext& ctx) {
  Tensor out(input.shape);
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
  if (ctx.record) output_ = out;
  return out;
}

Tensor ReLU::backward(const Tensor& grad_output) {
  Tensor gx(grad_output.shape);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = output_[i] > 0.0 ? grad_output[i] : 0.0;
  return gx;
}

// ---------------------------------------------------------------- MaxPool2d

MaxPool2d::MaxPool2d(int kernel, int stride, int padding, bool ceil_mode)
    : kernel_(kernel), stride_(stride), padding_(padding), ceil_mode_(ceil_mode) {
  if (kernel <= 0 || stride <= 0 || padding < 0 || 2 * padding > kernel)
    throw InvalidArgument("MaxPool2d: invalid options");
}

Tensor MaxPool2d::forward(const Tensor& input, RunContext& ctx) {
  expect_rank(input, 3, "MaxPool2d");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  auto out_size = [&](int in) {
    const int span = in + 2 * padding_ - kernel_;
    if (span < 0) throw InvalidArgument("MaxPool2d: input smaller than kernel");
    int o = (ceil_mode_ ? (span + stride_ - 1) / stride_ : span / stride_) + 1;
    // The last window must start inside the input or the left padding.
    if (ceil_mode_ && (o - 1) * stride_ >= in + padding_) --o;
    return o;
  };
  const int oh = out_size(h), ow = out_size(w);
  Tensor out({c, oh, ow});
  if (ctx.record) {
    input_shape_ = input.shape;
    argmax_.assign(out.size(), 0);
  }
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const int y0 = std::max(oy * stride_ - padding_, 0);
        const int y1 = std::min(oy * stride_ - padding_ + kernel_, h);
        const int x0 = std::max(ox * stride_ - padding_, 0);
        const int x1 = std::min(ox * stride_ - padding_ + kernel_, w);
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = static_cast<std::size_t>(ch) * h * w + y0 * w + x0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) {
            const std::size_t i = static_cast<std::size_t>(ch) * h * w + y * w + x;
            if (input[i] > best) {
              best = input[i];
              best_i = i;
            }
          }
        const std::size_t o = (static_cast<std::size_t>(ch) * oh + oy) * ow + ox;
        out[o] = best;
        if (ctx.record) argmax_[o] = best_i;
      }
  return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_output) {
  Tensor gx(input_shape_);
  for (std::size_t o = 0; o < grad_output.size(); ++o) gx[argmax_[o]] += grad_output[o];
  return gx;
}

// ---------------------------------------------------------------- AdaptiveAvgPool2d

namespace {
int bin_start(int i, int in, int out) { return (i * in) / out; }
int bin_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }
}  // namespace

Tensor AdaptiveAvgPool2d::forward(const Tensor& input, RunContext& ctx) {
  expect_rank(input, 3, "AdaptiveAvgPool2d");
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  if (ctx.record) input_shape_ = input.shape;
  Tensor out({c, out_h_, out_w_});
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < out_h_; ++oy)
      for (int ox = 0; ox < out_w_; ++ox) {
        const int y0 = bin_start(oy, h, out_h_), y1 = bin_end(oy, h, out_h_);
        const int x0 = bin_start(ox, w, out_w_), x1 = bin_end(ox, w, out_w_);
        double sum = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) sum += input[(static_cast<std::size_t>(ch) * h + y) * w + x];
        out[(static_cast<std::size_t>(ch) * out_h_ + oy) * out_w_ + ox] =
            sum / static_cast<double>((y1 - y0) * (x1 - x0));
      }
  return out;
}

Tensor AdaptiveAvgPool2d::backward(const Tensor& grad_output) {
  const int c = input_shape_[0], h = input_shape_[1], w = input_shape_[2];
  Tensor gx(input_shape_);
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < out_h_; ++oy)
      for (int ox = 0; ox < out_w_; ++ox) {
        const int y0 = bin_start(oy, h, out_h_), y1 = bin_end(oy, h, out_h_);
        const int x0 = bin_start(ox, w, out_w_), x1 = bin_end(ox, w, out_w_);
        const double g = grad_output[(static_cast<std::size_t>(ch) * out_h_ + oy) * out_w_ + ox] /
                         static_cast<double>((y1 - y0) * (x1 - x0));
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) gx[(static_cast<std::size_t>(ch) * h + y) * w + x] += g;
      }
  return gx;
}

// ---------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& input, RunContext& ctx) {
  if (ctx.record) input_shape_ = input.shape;
  return input.reshaped({static_cast<int>(input.size())});
}

Tensor Flatten::backward(const Tensor& grad_output) { return grad_output.reshaped(input_shape_); }

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double p) : p_(p) {
  if (p < 0.0 || p >= 1.0) throw InvalidArgument("Dropout: rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& input, RunContext& ctx) {
  if (!ctx.training || p_ == 0.0) {
    if (ctx.record) mask_.assign(input.size(), 1.0);
    return input;
  }
  if (ctx.rng == nullptr) throw InvalidArgument("Dropout: training mode requires an rng");
  std::bernoulli_distribution keep(1.0 - p_);
  const double scale = 1.0 / (1.0 - p_);
  Tensor out(input.shape);
  mask_.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    mask_[i] = keep(*ctx.rng) ? scale : 0.0;
    out[i] = input[i] * mask_[i];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_output) {
  Tensor gx(grad_output.shape);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = grad_output[i] * mask_[i];
  return gx;
}

// ---------------------------------------------------------------- Sequential

Sequential& Sequential::add(std::string name, LayerPtr layer) {
  layers_.emplace_back(std::move(name), std::move(layer));
  return *this;
}

Tensor Sequential::forward(const Tensor& input, RunContext& ctx) {
  Tensor x = input;
  for (auto& [name, layer] : layers_) x = layer->forward(x, ctx);
  return x;
}

Tensor Sequential::backward(const Tensor& grad_output) {
  Tensor g = grad_output;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
  return g;
}

void Sequential::collect_parameters(const std::string& prefix, ParameterList& out) {
  for (auto& [name, layer] : layers_) layer->collect_parameters(prefix + name + ".", out);
}

// ---------------------------------------------------------------- Residual

Residual::Residual(std::unique_ptr<Sequential> body, std::unique_ptr<Sequential> shortcut)
    : body_(std::move(body)), shortcut_(std::move(shortcut)) {}

Tensor Residual::forward(const Tensor& input, RunContext& ctx) {
  Tensor y = body_->forward(input, ctx);
  const Tensor skip = shortcut_ ? shortcut_->forward(input, ctx) : input;
  if (skip.shape != y.shape)
    throw InvalidArgument(fmt::format("Residual: shape mismatch {} vs {}", shape_string(y.shape),
                                      shape_string(skip.shape)));
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(y[i] + skip[i], 0.0);
  if (ctx.record) output_ = y;
  return y;
}

Tensor Residual::backward(const Tensor& grad_output) {
  Tensor g(grad_output.shape);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = output_[i] > 0.0 ? grad_output[i] : 0.0;
  Tensor gx = body_->backward(g);
  const Tensor gs = shortcut_ ? shortcut_->backward(g) : g;
  as_vector(gx) += as_vector(gs);
  return gx;
}

void Residual::collect_parameters(const std::string& prefix, ParameterList& out) {
  body_->collect_parameters(prefix, out);
  if (shortcut_) shortcut_->collect_parameters(prefix + "downsample.", out);
}

// ---------------------------------------------------------------- Concat

Concat& Concat::add(std::string name, LayerPtr branch) {
  branches_.emplace_back(std::move(name), std::move(branch));
  return *this;
}

Tensor Concat::forward(const Tensor& input, RunContext& ctx) {
  std::vector<Tensor> parts;
  parts.reserve(branches_.size());
  int channels = 0;
  for (auto& [name, branch] : branches_) {
    parts.push_back(branch->forward(input, ctx));
    const auto& p = parts.back();
    expect_rank(p, 3, "Concat");
    if (p.dim(1) != parts.front().dim(1) || p.dim(2) != parts.front().dim(2))
      throw InvalidArgument("Concat: branch spatial sizes differ");
    channels += p.dim(0);
  }
  Tensor out({channels, parts.front().dim(1), parts.front().dim(2)});
  std::size_t offset = 0;
  if (ctx.record) channels_.clear();
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
    if (ctx.record) channels_.push_back(p.dim(0));
  }
  return out;
}

Tensor Concat::backward(const Tensor& grad_output) {
  const int h = grad_output.dim(1), w = grad_output.dim(2);
  std::size_t offset = 0;
  Tensor gx;
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    Tensor part({channels_[b], h, w});
    std::copy_n(grad_output.data.begin() + static_cast<std::ptrdiff_t>(offset), part.size(),
                part.data.begin());
    offset += part.size();
    Tensor g = branches_[b].second->backward(part);
    if (b == 0)
      gx = std::move(g);
    else
      as_vector(gx) += as_vector(g);
  }
  return gx;
}

void Concat::collect_parameters(const std::string& prefix, ParameterList& out) {
  for (auto& [name, branch] : branches_) branch->collect_parameters(prefix + name + ".", out);
}

Tensor softmax(const Tensor& logits) {
  Tensor p(logits.shape);
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits.data) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (auto& v : p.data) v /= sum;
  return p;
}

}  // namespace lesionfuse::nn
