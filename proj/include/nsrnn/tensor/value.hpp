// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NSRNN_TENSOR_VALUE_HPP
#define NSRNN_TENSOR_VALUE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "nsrnn/config.hpp"

namespace nsrnn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
Shape row_major_strides(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor of reals. Rank 0 is a scalar with one element.
struct TensorValue {
  Shape shape;
  std::vector<real_t> data;

  TensorValue() = default;
  TensorValue(Shape s, std::vector<real_t> d);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }

  real_t& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  real_t operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

  // Multi-index access, mostly for tests; indices.size() must equal rank.
  real_t at(const std::vector<int64_t>& indices) const;

  bool has_nan() const;

  static TensorValue zeros(Shape s);
  static TensorValue full(Shape s, real_t v);
  static TensorValue scalar(real_t v);
};

}  // namespace nsrnn

#endif
