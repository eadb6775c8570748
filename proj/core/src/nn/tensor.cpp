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

#include "lesionfuse/nn/tensor.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lesionfuse/error.hpp"

namespace lesionfuse::nn {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw InvalidArgument("tensor: negative dimension");
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) { return fmt::format("({})", fmt::join(shape, ", ")); }

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
  if (numel(shape) != data.size())
    throw InvalidArgument(fmt::format("tensor: {} values do not fill shape {}", data.size(),
                                      shape_string(shape)));
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

Tensor Tensor::reshaped(Shape s) const {
  if (numel(s) != data.size())
    throw InvalidArgument(fmt::format("tensor: cannot reshape {} to {}", shape_string(shape),
                                      shape_string(s)));
  return Tensor(std::move(s), data);
}

}  // namespace lesionfuse::nn
