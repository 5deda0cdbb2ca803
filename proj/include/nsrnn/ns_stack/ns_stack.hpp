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

#ifndef NSRNN_NS_STACK_NS_STACK_HPP_
#define NSRNN_NS_STACK_NS_STACK_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsrnn/tensor/einsum.hpp"
#include "nsrnn/tensor/ops.hpp"
#include "nsrnn/wpda/wpda.hpp"

namespace nsrnn {

// Every surviving run's weight vanished at this step: the action
// weights starved all configurations (e.g. the only mass pointed at
// popping the bottom marker).
class DeadStackError : public std::runtime_error {
 public:
  DeadStackError(int step, int batch_index);
  int step() const { return step_; }
  int batch_index() const { return batch_index_; }

 private:
  int step_;
  int batch_index_;
};

// Per-step action tensors for a PDA on input w: result[j-1] is the
// [Q, G, Q, 2G+1] tensor for position j, scanning w_j.  The last axis
// packs the actions as push-y (0..G-1), replace-with-y (G..2G-1), pop
// (2G).  Under the Log semiring entries are log-weights and absent
// transitions are -inf; under Real they are the raw weights.
std::vector<TensorValue> pack_transitions(const WeightedPda& pda, const std::string& w,
                                          Semiring sr);

// Inserts a leading batch axis of size 1.
TensorValue with_batch_axis(TensorValue v);

struct StackDims {
  int batch = 1;
  int states = 1;
  int stack_symbols = 1;  // includes the bottom marker at index 0
};

struct WfaNode {
  int j, q, x;
};

struct WfaEdge {
  bool from_init;     // root edges start at the initial node
  int i, q, x;        // source (ignored when from_init)
  int j, r, y;        // target; y is also the edge's symbol label
  double weight;
};

struct WfaSnapshot {
  // The initial node is implicit; these are the (j, q, x) nodes.
  std::vector<WfaNode> nodes;
  std::vector<WfaEdge> edges;
};

// All runs of a nondeterministic PDA, simulated simultaneously.  The
// stack contents across runs form a weighted automaton over positions
// 0..t: node (i, q, x) stands for "position i, state q, x on top", an
// edge (i,q,x) -> (j,r,y) carries the inner weight of every
// computation segment that nets a single push of y on top of x, and a
// root edge from the initial node to (j,r,y) carries the weight of
// runs whose whole stack is the single symbol y.  Forward weights
// accumulate path weights from the initial node and marginalize into
// the top-symbol reading.
//
// Step j consumes the action tensor for input position j (1-based);
// layer 0 is the start configuration.  Storage grows quadratically:
// inner-weight rows for earlier layers are retained untouched, never
// copied.
class NondeterministicStack {
 public:
  NondeterministicStack(StackDims dims, Semiring sr, int block = 256);

  int layers() const { return t_; }
  Semiring semiring() const { return sr_; }
  const StackDims& dims() const { return dims_; }

  // Advances one position.  `delta` has shape [batch, Q, G, Q, 2G+1]
  // (see pack_transitions for the action packing) and may be tracked
  // on a tape, in which case the whole recurrence is differentiable.
  // Returns the reading: a [batch, G] probability vector over top
  // stack symbols.  Throws DeadStackError when a batch element's
  // forward weights all vanish.
  Tensor step(const Tensor& delta);

  // Reading for the current layer; at layer 0 this is one-hot on the
  // bottom marker.
  Tensor reading() const;

  // Forward weights [batch, Q, G] for layer j <= layers().
  const Tensor& forward_weights(int j) const;
  // Inner weights [batch, Q, G, Q, G] of the edge bundle i -> j,
  // 0 <= i < j <= layers().
  const Tensor& inner_weights(int i, int j) const;
  // Root-edge weights [batch, Q, G] into layer j (the axiom edge at
  // j = 0).
  const Tensor& root_weights(int j) const;

  // Stored inner-weight entries per batch element: t(t+1)/2 * Q^2 G^2.
  int64_t stored_inner_entries() const;
  // Multiply-accumulate count of the two-edge (pop) combination stage,
  // the asymptotically dominant cost: sum over layers j and sources i
  // of (j - i - 2) * Q^3 G^2 * batch.
  int64_t pop_term_macs() const;

  // Weighted-automaton view of batch element 0: nodes with weight
  // above `threshold` (weights are probabilities; log-space values are
  // exponentiated), edges above it whose source made the cut, plus the
  // axiom edge unconditionally.
  WfaSnapshot wfa_snapshot(double threshold = 0) const;

 private:
  Tensor reading_from(const Tensor& fwd) const;
  double node_weight(const Tensor& t, int64_t flat_index) const;

  StackDims dims_;
  Semiring sr_;
  int block_;
  int t_ = 0;
  std::vector<std::vector<Tensor>> inner_;  // inner_[j][i], i < j
  std::vector<Tensor> roots_;               // per layer
  std::vector<Tensor> fwd_;                 // per layer
  int64_t pop_macs_ = 0;
};

// DOT rendering of a snapshot; names index states and stack symbols.
std::string wfa_to_dot(const WfaSnapshot& snap, const std::vector<std::string>& state_names,
                       const std::vector<std::string>& stack_names);

}  // namespace nsrnn

#endif  // NSRNN_NS_STACK_NS_STACK_HPP_
