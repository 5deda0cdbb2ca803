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

#include "nsrnn/tensor/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace nsrnn {

int ParameterStore::add(const std::string& name, TensorValue init) {
  if (find(name) >= 0) {
    throw std::invalid_argument("ParameterStore: duplicate parameter name " + name);
  }
  Parameter p;
  p.name = name;
  p.m = TensorValue::zeros(init.shape);
  p.v = TensorValue::zeros(init.shape);
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

int ParameterStore::find(const std::string& name) const {
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

Parameter& ParameterStore::param(int id) { return params_.at(static_cast<size_t>(id)); }

const Parameter& ParameterStore::param(int id) const {
  return params_.at(static_cast<size_t>(id));
}

std::vector<Tensor> ParameterStore::bind(Tape& tape) const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const Parameter& p : params_) out.push_back(tape.input(p.value));
  return out;
}

int64_t ParameterStore::total_elements() const {
  int64_t n = 0;
  for (const Parameter& p : params_) n += p.value.numel();
  return n;
}

Adam::Adam(ParameterStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {}

real_t Adam::step(const Tape& tape, const std::vector<Tensor>& bound) {
  if (bound.size() != store_.size()) {
    throw std::invalid_argument("Adam::step: bound tensor count mismatch");
  }
  std::vector<const TensorValue*> grads(bound.size(), nullptr);
  real_t sq = 0;
  for (size_t i = 0; i < bound.size(); ++i) {
    grads[i] = tape.grad(bound[i]);
    if (!grads[i]) continue;
    for (real_t g : grads[i]->data) sq += g * g;
  }
  real_t norm = std::sqrt(sq);
  real_t scale = 1;
  if (cfg_.clip_threshold > 0 && norm > cfg_.clip_threshold) {
    scale = cfg_.clip_threshold / norm;
  }

  ++t_;
  real_t bc1 = real_t(1) - std::pow(cfg_.beta1, static_cast<real_t>(t_));
  real_t bc2 = real_t(1) - std::pow(cfg_.beta2, static_cast<real_t>(t_));
  for (size_t i = 0; i < bound.size(); ++i) {
    Parameter& p = store_.param(static_cast<int>(i));
    for (size_t k = 0; k < p.value.data.size(); ++k) {
      real_t g = grads[i] ? grads[i]->data[k] * scale : real_t(0);
      p.m.data[k] = cfg_.beta1 * p.m.data[k] + (real_t(1) - cfg_.beta1) * g;
      p.v.data[k] = cfg_.beta2 * p.v.data[k] + (real_t(1) - cfg_.beta2) * g * g;
      real_t mhat = p.m.data[k] / bc1;
      real_t vhat = p.v.data[k] / bc2;
      p.value.data[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  return norm;
}

}  // namespace nsrnn
