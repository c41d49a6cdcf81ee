// Copyright 2026 The LayerScope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LAYERSCOPE_TENSOR_HPP_
#define LAYERSCOPE_TENSOR_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace layerscope {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array of doubles. length(data) == product(shape) always
// holds; every dimension is positive.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* raw() { return data_.data(); }
  const double* raw() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Same data, new shape with equal element count.
  void reshape(Shape shape);
  void fill(double value);
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Equal shapes and identical bit patterns (distinguishes -0.0, compares NaNs).
bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

// A trainable tensor with its gradient accumulator. When `frozen`, no
// optimizer step touches `value`.
struct ParamTensor {
  ParamTensor() = default;
  explicit ParamTensor(Tensor initial)
      : value(std::move(initial)), grad(value.shape()), frozen(false) {}

  void zero_grad() { grad.fill(0.0); }

  Tensor value;
  Tensor grad;
  bool frozen = false;
};

}  // namespace layerscope

#endif  // LAYERSCOPE_TENSOR_HPP_
