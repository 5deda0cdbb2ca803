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

#ifndef NSRNN_TENSOR_TAPE_HPP
#define NSRNN_TENSOR_TAPE_HPP

#include <functional>
#include <memory>
#include <vector>

#include "nsrnn/tensor/value.hpp"

namespace nsrnn {

class Tape;

// Immutable tensor handle. Carries its value plus, when produced under a
// tape, a link to the recording node so reverse-mode gradients can be read
// back after Tape::backward.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorValue v)
      : value_(std::make_shared<const TensorValue>(std::move(v))) {}
  explicit Tensor(std::shared_ptr<const TensorValue> v) : value_(std::move(v)) {}

  bool defined() const { return value_ != nullptr; }
  bool tracked() const { return tape_ != nullptr; }

  // On an rvalue the value is returned by copy: a reference into a handle
  // that dies with the full expression would dangle.
  const TensorValue& value() const&;
  TensorValue value() && { return value(); }
  const Shape& shape() const { return value().shape; }
  int64_t numel() const { return value().numel(); }
  real_t scalar() const;

  std::shared_ptr<const TensorValue> ptr() const { return value_; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

 private:
  friend class Tape;
  std::shared_ptr<const TensorValue> value_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Wraps a value as an untracked constant.
Tensor constant(TensorValue v);

// Record of one forward computation. Ops append nodes as they execute;
// backward runs a single reverse sweep, visiting each node at most once.
// Gradients of tensors the loss does not reach stay absent.
class Tape {
 public:
  using BackwardFn = std::function<void(const TensorValue& out_grad, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a tracked leaf (parameter or input slot).
  Tensor input(TensorValue v);
  Tensor input(std::shared_ptr<const TensorValue> v);

  // Appends an op node. The backward fn accumulates into parent grad
  // buffers via grad_buffer(); it must never touch nodes created later.
  Tensor record(std::shared_ptr<const TensorValue> out, BackwardFn fn);

  // Runs the reverse sweep from `root`, seeding its gradient with ones.
  // May be called once per tape.
  void backward(const Tensor& root);

  // Gradient of a tracked tensor after backward; nullptr when the loss did
  // not reach it.
  const TensorValue* grad(const Tensor& t) const;

  // Zero-initialized gradient buffer for a node; for use by backward fns.
  TensorValue& grad_buffer(int node);

  size_t node_count() const { return nodes_.size(); }
  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    BackwardFn fn;
    Shape shape;
  };
  std::vector<Node> nodes_;
  std::vector<std::unique_ptr<TensorValue>> grads_;
  bool backward_done_ = false;
};

// Shared op plumbing: picks the single tape behind a set of operands
// (nullptr when all are constants; throws if operands disagree).
Tape* tape_of(std::initializer_list<const Tensor*> ts);

}  // namespace nsrnn

#endif
