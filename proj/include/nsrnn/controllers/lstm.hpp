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

#ifndef NSRNN_CONTROLLERS_LSTM_HPP_
#define NSRNN_CONTROLLERS_LSTM_HPP_

#include <string>
#include <vector>

#include "nsrnn/tensor/ops.hpp"
#include "nsrnn/tensor/optim.hpp"
#include "nsrnn/tensor/rng.hpp"

namespace nsrnn {

// Single-layer LSTM cell.  Gate weights are fused into one input map
// [4d, in], one recurrent map [4d, d] and one bias [4d], blocks
// ordered input gate, forget gate, candidate, output gate.  All
// weights and biases initialize uniform on [-0.1, 0.1]; hidden and
// cell state start at exactly zero.
class LstmCell {
 public:
  LstmCell(ParameterStore& store, const std::string& prefix, int input_size,
           int hidden_size, Rng& rng);

  struct State {
    Tensor h;  // [batch, d]
    Tensor c;  // [batch, d]
  };

  State initial_state(int batch) const;

  // One update; `bound` is the ParameterStore::bind result for the
  // store this cell was registered in.
  State step(const std::vector<Tensor>& bound, const Tensor& input, const State& prev) const;

  int input_size() const { return in_; }
  int hidden_size() const { return d_; }

 private:
  int in_;
  int d_;
  int wx_, wh_, b_;  // parameter ids
};

// Uniform [-0.1, 0.1] entries.
TensorValue uniform_init(Shape shape, Rng& rng);
// Xavier/Glorot uniform for an affine map [rows, cols]: bound
// sqrt(6 / (rows + cols)).
TensorValue xavier_init(int rows, int cols, Rng& rng);

}  // namespace nsrnn

#endif  // NSRNN_CONTROLLERS_LSTM_HPP_
