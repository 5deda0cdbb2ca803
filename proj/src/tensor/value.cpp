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

#include "nsrnn/tensor/value.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nsrnn {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw std::invalid_argument("shape_numel: negative dimension");
    n *= d;
  }
  return n;
}

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (int64_t i = static_cast<int64_t>(shape.size()) - 2; i >= 0; --i) {
    strides[i] = strides[i + 1] * shape[i + 1];
  }
  return strides;
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

TensorValue::TensorValue(Shape s, std::vector<real_t> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != numel()) {
    throw std::invalid_argument("TensorValue: data size does not match shape " +
                                shape_to_string(shape));
  }
}

real_t TensorValue::at(const std::vector<int64_t>& indices) const {
  if (indices.size() != shape.size()) {
    throw std::invalid_argument("TensorValue::at: wrong index rank");
  }
  Shape strides = row_major_strides(shape);
  int64_t off = 0;
  for (size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < 0 || indices[i] >= shape[i]) {
      throw std::out_of_range("TensorValue::at: index out of range");
    }
    off += indices[i] * strides[i];
  }
  return data[static_cast<size_t>(off)];
}

bool TensorValue::has_nan() const {
  for (real_t v : data) {
    if (std::isnan(v)) return true;
  }
  return false;
}

TensorValue TensorValue::zeros(Shape s) {
  int64_t n = shape_numel(s);
  return TensorValue(std::move(s), std::vector<real_t>(static_cast<size_t>(n), real_t(0)));
}

TensorValue TensorValue::full(Shape s, real_t v) {
  int64_t n = shape_numel(s);
  return TensorValue(std::move(s), std::vector<real_t>(static_cast<size_t>(n), v));
}

TensorValue TensorValue::scalar(real_t v) { return TensorValue(Shape{}, {v}); }

}  // namespace nsrnn
