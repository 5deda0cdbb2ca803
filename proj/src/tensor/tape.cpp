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

#include "nsrnn/tensor/tape.hpp"

#include <stdexcept>

namespace nsrnn {

const TensorValue& Tensor::value() const& {
  if (!value_) throw std::logic_error("Tensor: undefined");
  return *value_;
}

real_t Tensor::scalar() const {
  const TensorValue& v = value();
  if (v.numel() != 1) throw std::logic_error("Tensor::scalar: not a scalar");
  return v.data[0];
}

Tensor constant(TensorValue v) {
  return Tensor(std::make_shared<const TensorValue>(std::move(v)));
}

Tensor Tape::input(TensorValue v) {
  return input(std::make_shared<const TensorValue>(std::move(v)));
}

Tensor Tape::input(std::shared_ptr<const TensorValue> v) {
  if (!v) throw std::invalid_argument("Tape::input: null value");
  Tensor t(std::move(v));
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{nullptr, t.value().shape});
  return t;
}

Tensor Tape::record(std::shared_ptr<const TensorValue> out, BackwardFn fn) {
  if (!out) throw std::invalid_argument("Tape::record: null output");
  Tensor t(std::move(out));
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{std::move(fn), t.value().shape});
  return t;
}

void Tape::backward(const Tensor& root) {
  if (backward_done_) throw std::logic_error("Tape::backward: already ran");
  if (root.tape_ != this || root.node_ < 0) {
    throw std::invalid_argument("Tape::backward: root not recorded on this tape");
  }
  backward_done_ = true;
  grads_.resize(nodes_.size());
  grad_buffer(root.node_);
  for (real_t& g : grads_[static_cast<size_t>(root.node_)]->data) g = real_t(1);
  for (int i = root.node_; i >= 0; --i) {
    auto& g = grads_[static_cast<size_t>(i)];
    if (!g) continue;
    if (nodes_[static_cast<size_t>(i)].fn) {
      nodes_[static_cast<size_t>(i)].fn(*g, *this);
    }
  }
}

const TensorValue* Tape::grad(const Tensor& t) const {
  if (t.tape_ != this || t.node_ < 0) return nullptr;
  if (static_cast<size_t>(t.node_) >= grads_.size()) return nullptr;
  return grads_[static_cast<size_t>(t.node_)].get();
}

TensorValue& Tape::grad_buffer(int node) {
  if (node < 0 || static_cast<size_t>(node) >= nodes_.size()) {
    throw std::logic_error("Tape::grad_buffer: bad node id");
  }
  if (grads_.size() < nodes_.size()) grads_.resize(nodes_.size());
  auto& slot = grads_[static_cast<size_t>(node)];
  if (!slot) {
    slot = std::make_unique<TensorValue>(
        TensorValue::zeros(nodes_[static_cast<size_t>(node)].shape));
  }
  return *slot;
}

Tape* tape_of(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->defined() || !t->tracked()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw std::invalid_argument("op: operands recorded on different tapes");
    }
  }
  return tape;
}

}  // namespace nsrnn
