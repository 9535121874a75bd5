/*
 * Copyright 2026 The FAA Lab Authors.
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
#include <span>
#include <string>
#include <vector>

namespace faa {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense row-major tensor of doubles. Most of the library works with rank-2
// tensors ([rows x cols]) and rank-1 vectors.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled (or `fill`-filled) tensor of the given shape.
  explicit Tensor(Shape shape, double fill = 0.0);

  // Takes ownership of `data`; element count must equal the shape product
  // and every value must be finite.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors. Rank-1 tensors are treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  // Scalar value of a one-element tensor.
  double item() const;

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Pure tensor math (no gradient recording). The autodiff layer calls these
// for its forward passes.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Row-wise softmax, stabilized by subtracting each row's max.
Tensor softmax_rows(const Tensor& x);

// Normalizes each row of x (last dimension d) to zero mean and unit variance,
// then applies gain/bias of length d. `eps` is added to the variance inside
// the square root.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

// S[i][j] = <a_i, b_j> / (|a_i| |b_j|). Throws DegenerateInputError on a
// zero-norm row.
Tensor cosine_similarity_matrix(const Tensor& a, const Tensor& b);

// Rows scaled to unit L2 norm. Throws DegenerateInputError on a zero row.
Tensor l2_normalize_rows(const Tensor& x);

// Rows of `a` followed by rows of `b`.
Tensor concat_rows(const Tensor& a, const Tensor& b);

// Gathers rows by index.
Tensor take_rows(const Tensor& x, std::span<const std::size_t> indices);

double gelu(double x);
double gelu_grad(double x);

}  // namespace faa
