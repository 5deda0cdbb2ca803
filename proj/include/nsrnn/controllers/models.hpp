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

#ifndef NSRNN_CONTROLLERS_MODELS_HPP_
#define NSRNN_CONTROLLERS_MODELS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "nsrnn/controllers/lstm.hpp"
#include "nsrnn/ns_stack/ns_stack.hpp"

namespace nsrnn {

enum class ModelKind { Ns, Superposition, Stratification, Lstm };

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::Lstm;
  std::string alphabet;  // prediction symbols; BOS is appended internally
  int hidden_size = 20;
  int states = 2;         // nondeterministic stack
  int stack_symbols = 2;  // nondeterministic stack, includes the bottom marker
  int stack_embedding = 20;  // baseline stack cell width
  int block = 256;           // log-space accumulation block size

  int num_symbols() const { return static_cast<int>(alphabet.size()); }
  int bos_index() const { return num_symbols(); }
  // Width of the stack reading fed back into the controller.
  int reading_size() const;
  // One-hot over alphabet + BOS, concatenated with the reading.
  int input_size() const { return num_symbols() + 1 + reading_size(); }
};

// A language model over single-character symbols: an LSTM controller
// plus one of three differentiable stacks (or none).  Parameters live
// in a ParameterStore; a forward pass binds them onto a tape and runs
// through ModelRun.
class Model {
 public:
  Model(ModelConfig cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  // Tape inputs for a training pass, or untracked constants when
  // `tape` is null (inference).
  std::vector<Tensor> bind(Tape* tape) const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

 private:
  friend class ModelRun;
  ModelConfig cfg_;
  ParameterStore store_;
  std::unique_ptr<LstmCell> lstm_;
  int out_w_ = -1, out_b_ = -1;    // symbol softmax head
  int act_w_ = -1, act_b_ = -1;    // stack action head
  int push_w_ = -1, push_b_ = -1;  // pushed-vector head (baselines)
};

// State of one forward pass over a batch of equal-length strings.
// Feed one-hot inputs left to right, starting with BOS; each step
// returns the distribution over the next symbol.  The stack update
// after the final prediction can be skipped with advance_stack=false.
class ModelRun {
 public:
  ModelRun(const Model& model, std::vector<Tensor> bound, int batch);

  // input: [batch, |alphabet|+1].  Returns [batch, |alphabet|].
  Tensor step(const Tensor& input, bool advance_stack = true);

  const Tensor& reading() const { return reading_; }
  const LstmCell::State& state() const { return state_; }
  const NondeterministicStack* stack() const { return stack_.get(); }

 private:
  void advance(const Tensor& hidden);

  const Model& m_;
  std::vector<Tensor> bound_;
  int batch_;
  LstmCell::State state_;
  Tensor reading_;
  std::unique_ptr<NondeterministicStack> stack_;  // ModelKind::Ns
  std::vector<Tensor> cells_;                     // baseline cell vectors, top first
  std::vector<Tensor> strengths_;                 // stratification strengths, top first
  Tensor ones_;                                   // [batch] of 1
};

// Rows of one-hots: result[i, ids[i]] = 1.
TensorValue one_hot_rows(const std::vector<int>& ids, int width);

}  // namespace nsrnn

#endif  // NSRNN_CONTROLLERS_MODELS_HPP_
