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

#ifndef NSRNN_TENSOR_OPTIM_HPP_
#define NSRNN_TENSOR_OPTIM_HPP_

#include <string>
#include <vector>

#include "nsrnn/tensor/tape.hpp"

namespace nsrnn {

struct Parameter {
  std::string name;
  TensorValue value;
  // Adam first/second moment estimates, kept alongside the value so a
  // parameter owns all of its training state.
  TensorValue m;
  TensorValue v;
};

// Named trainable tensors in a fixed insertion order.  A training step
// binds every parameter onto a fresh tape, builds the loss, runs
// backward, and hands the tape back to the optimizer.
class ParameterStore {
 public:
  // Returns the new parameter's id.  Names must be unique.
  int add(const std::string& name, TensorValue init);
  int find(const std::string& name) const;  // -1 when absent
  Parameter& param(int id);
  const Parameter& param(int id) const;
  size_t size() const { return params_.size(); }

  // Registers every parameter as a tape input; result is indexed by
  // parameter id.
  std::vector<Tensor> bind(Tape& tape) const;

  int64_t total_elements() const;

 private:
  std::vector<Parameter> params_;
};

struct AdamConfig {
  real_t lr = real_t(1e-3);
  real_t beta1 = real_t(0.9);
  real_t beta2 = real_t(0.999);
  real_t eps = real_t(1e-8);
  // Global L2-norm clipping threshold; 0 disables clipping.
  real_t clip_threshold = 0;
};

class Adam {
 public:
  Adam(ParameterStore& store, AdamConfig cfg);

  // Applies one update from the gradients recorded on `tape` for the
  // tensors returned by ParameterStore::bind.  Parameters the graph
  // never touched get a zero gradient.  Returns the global gradient
  // norm before clipping.
  real_t step(const Tape& tape, const std::vector<Tensor>& bound);

  void set_lr(real_t lr) { cfg_.lr = lr; }
  real_t lr() const { return cfg_.lr; }
  int64_t steps_taken() const { return t_; }

 private:
  ParameterStore& store_;
  AdamConfig cfg_;
  int64_t t_ = 0;
};

}  // namespace nsrnn

#endif  // NSRNN_TENSOR_OPTIM_HPP_
