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

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lesionfuse::nn {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of doubles. Feature maps are (C, H, W); vectors
/// are (N).
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(numel(shape), fill) {}
  Tensor(Shape s, std::vector<double> values);

  static Tensor vector(std::vector<double> values) {
    const int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
  }

  std::size_t size() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  int rank() const { return static_cast<int>(shape.size()); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  void fill(double v);
  Tensor reshaped(Shape s) const;
  bool operator==(const Tensor&) const = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

inline MatrixMap as_matrix(Tensor& t, int rows, int cols) { return {t.data.data(), rows, cols}; }
inline ConstMatrixMap as_matrix(const Tensor& t, int rows, int cols) {
  return {t.data.data(), rows, cols};
}
inline VectorMap as_vector(Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.size())};
}
inline ConstVectorMap as_vector(const Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.size())};
}

}  // namespace lesionfuse::nn
