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

#include "nsrnn/controllers/lstm.hpp"

#include <cmath>

namespace nsrnn {

TensorValue uniform_init(Shape shape, Rng& rng) {
  TensorValue v = TensorValue::zeros(std::move(shape));
  for (real_t& x : v.data) x = rng.uniform(real_t(-0.1), real_t(0.1));
  return v;
}

TensorValue xavier_init(int rows, int cols, Rng& rng) {
  TensorValue v = TensorValue::zeros({rows, cols});
  real_t bound = std::sqrt(real_t(6) / real_t(rows + cols));
  for (real_t& x : v.data) x = rng.uniform(-bound, bound);
  return v;
}

LstmCell::LstmCell(ParameterStore& store, const std::string& prefix, int input_size,
                   int hidden_size, Rng& rng)
    : in_(input_size), d_(hidden_size) {
  wx_ = store.add(prefix + ".wx", uniform_init({4 * d_, in_}, rng));
  wh_ = store.add(prefix + ".wh", uniform_init({4 * d_, d_}, rng));
  b_ = store.add(prefix + ".b", uniform_init({4 * d_}, rng));
}

LstmCell::State LstmCell::initial_state(int batch) const {
  Tensor z = constant(TensorValue::zeros({batch, d_}));
  return {z, z};
}

LstmCell::State LstmCell::step(const std::vector<Tensor>& bound, const Tensor& input,
                               const State& prev) const {
  Tensor z = add(linear(input, bound[static_cast<size_t>(wx_)], bound[static_cast<size_t>(b_)]),
                 linear(prev.h, bound[static_cast<size_t>(wh_)]));
  Tensor gi = sigmoid(slice_last(z, 0, d_));
  Tensor gf = sigmoid(slice_last(z, d_, 2 * d_));
  Tensor gc = tanh(slice_last(z, 2 * d_, 3 * d_));
  Tensor go = sigmoid(slice_last(z, 3 * d_, 4 * d_));
  Tensor c = add(mul(gf, prev.c), mul(gi, gc));
  Tensor h = mul(go, tanh(c));
  return {h, c};
}

}  // namespace nsrnn
