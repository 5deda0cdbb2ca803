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

#include "nsrnn/ns_stack/ns_stack.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace nsrnn {

namespace {

constexpr real_t kNegInf = -std::numeric_limits<real_t>::infinity();

std::string dead_stack_message(int step, int batch_index) {
  return "dead stack at step " + std::to_string(step) + " (batch element " +
         std::to_string(batch_index) + "): all forward weights vanished";
}

}  // namespace

DeadStackError::DeadStackError(int step, int batch_index)
    : std::runtime_error(dead_stack_message(step, batch_index)),
      step_(step),
      batch_index_(batch_index) {}

std::vector<TensorValue> pack_transitions(const WeightedPda& pda, const std::string& w,
                                          Semiring sr) {
  int q = pda.num_states();
  int g = pda.num_stack_symbols();
  int acts = 2 * g + 1;
  std::vector<TensorValue> out;
  out.reserve(w.size());
  for (char c : w) {
    int a = pda.input_index(c);
    if (a < 0) {
      throw std::invalid_argument(std::string("pack_transitions: symbol '") + c +
                                  "' not in alphabet");
    }
    TensorValue sum = TensorValue::zeros({q, g, q, acts});
    for (const Transition& t : pda.transitions) {
      if (t.input != a) continue;
      int act = t.action.kind == ActionKind::Push      ? t.action.symbol
                : t.action.kind == ActionKind::Replace ? g + t.action.symbol
                                                       : 2 * g;
      sum[((int64_t(t.state) * g + t.top) * q + t.next_state) * acts + act] += t.weight;
    }
    if (sr == Semiring::Log) {
      for (real_t& v : sum.data) v = v > 0 ? std::log(v) : kNegInf;
    }
    out.push_back(std::move(sum));
  }
  return out;
}

TensorValue with_batch_axis(TensorValue v) {
  v.shape.insert(v.shape.begin(), 1);
  return v;
}

NondeterministicStack::NondeterministicStack(StackDims dims, Semiring sr, int block)
    : dims_(dims), sr_(sr), block_(block) {
  if (dims.batch < 1 || dims.states < 1 || dims.stack_symbols < 1) {
    throw std::invalid_argument("NondeterministicStack: bad dimensions");
  }
  TensorValue base =
      sr == Semiring::Log
          ? TensorValue::full({dims.batch, dims.states, dims.stack_symbols}, kNegInf)
          : TensorValue::zeros({dims.batch, dims.states, dims.stack_symbols});
  real_t one = sr == Semiring::Log ? real_t(0) : real_t(1);
  for (int b = 0; b < dims.batch; ++b) {
    base[int64_t(b) * dims.states * dims.stack_symbols] = one;  // (start state, bottom)
  }
  Tensor axiom = constant(base);
  inner_.emplace_back();
  roots_.push_back(axiom);
  fwd_.push_back(axiom);
}

namespace {

Tensor combine(Semiring sr, const Tensor& a, const Tensor& b) {
  return sr == Semiring::Log ? logaddexp(a, b) : add(a, b);
}

}  // namespace

Tensor NondeterministicStack::step(const Tensor& delta) {
  int q = dims_.states;
  int g = dims_.stack_symbols;
  Shape expect{dims_.batch, q, g, q, 2 * g + 1};
  if (!same_shape(delta.shape(), expect)) {
    throw std::invalid_argument("stack step: delta shape " + shape_to_string(delta.shape()) +
                                ", expected " + shape_to_string(expect));
  }
  int j = t_ + 1;
  Tensor push = slice_last(delta, 0, g);
  Tensor repl = slice_last(delta, g, 2 * g);
  Tensor pop = reshape(slice_last(delta, 2 * g, 2 * g + 1), {dims_.batch, q, g, q});

  // For each earlier layer k, close off every two-edge detour that
  // returns to k's top symbol: the net-push segment k -> j-1 followed
  // by this step's pop.
  std::vector<Tensor> closed;
  closed.reserve(static_cast<size_t>(j) - 1);
  for (int k = 0; k + 1 < j; ++k) {
    closed.push_back(einsum(sr_, "btysz,bszr->btyr", {inner_weights(k, j - 1), pop}, block_));
  }

  std::vector<Tensor> row(static_cast<size_t>(j));
  row[static_cast<size_t>(j) - 1] = push;
  for (int i = j - 2; i >= 0; --i) {
    Tensor e = einsum(sr_, "bqxsz,bszry->bqxry", {inner_weights(i, j - 1), repl}, block_);
    if (i <= j - 3) {
      std::vector<std::vector<Tensor>> inst;
      inst.reserve(static_cast<size_t>(j - i) - 2);
      for (int k = i + 1; k + 1 < j; ++k) {
        inst.push_back({inner_weights(i, k), closed[static_cast<size_t>(k)]});
      }
      Tensor p = einsum_sum(sr_, "bqxty,btyr->bqxry", inst, block_);
      pop_macs_ += int64_t(j - i - 2) * q * q * q * g * g * dims_.batch;
      e = combine(sr_, e, p);
    }
    row[static_cast<size_t>(i)] = e;
  }

  Tensor root = einsum(sr_, "bsz,bszry->bry", {roots_[static_cast<size_t>(j) - 1], repl}, block_);
  if (j >= 2) {
    std::vector<std::vector<Tensor>> inst;
    inst.reserve(static_cast<size_t>(j) - 1);
    for (int k = 0; k + 1 < j; ++k) {
      inst.push_back({roots_[static_cast<size_t>(k)], closed[static_cast<size_t>(k)]});
    }
    root = combine(sr_, root, einsum_sum(sr_, "bty,btyr->bry", inst, block_));
  }

  std::vector<std::vector<Tensor>> paths;
  paths.reserve(static_cast<size_t>(j));
  for (int i = 0; i < j; ++i) {
    paths.push_back({fwd_[static_cast<size_t>(i)], row[static_cast<size_t>(i)]});
  }
  Tensor f = combine(sr_, root, einsum_sum(sr_, "bqx,bqxry->bry", paths, block_));

  const TensorValue& fv = f.value();
  for (int b = 0; b < dims_.batch; ++b) {
    bool alive = false;
    for (int64_t i = 0; i < int64_t(q) * g; ++i) {
      real_t v = fv[int64_t(b) * q * g + i];
      if (sr_ == Semiring::Log ? v != kNegInf : v > 0) {
        alive = true;
        break;
      }
    }
    if (!alive) throw DeadStackError(j, b);
  }

  inner_.push_back(std::move(row));
  roots_.push_back(std::move(root));
  fwd_.push_back(std::move(f));
  t_ = j;
  return reading();
}

Tensor NondeterministicStack::reading_from(const Tensor& fwd) const {
  if (sr_ == Semiring::Log) {
    Tensor lam = logsumexp_axis(fwd, 1);  // marginalize states
    return exp(log_softmax_last(lam));
  }
  Tensor s = sum_axis(fwd, 1);
  return div_bcast_last(s, sum_axis(s, -1));
}

Tensor NondeterministicStack::reading() const {
  return reading_from(fwd_[static_cast<size_t>(t_)]);
}

const Tensor& NondeterministicStack::forward_weights(int j) const {
  if (j < 0 || j > t_) throw std::out_of_range("forward_weights: layer out of range");
  return fwd_[static_cast<size_t>(j)];
}

const Tensor& NondeterministicStack::inner_weights(int i, int j) const {
  if (j < 1 || j > t_ || i < 0 || i >= j) {
    throw std::out_of_range("inner_weights: index out of range");
  }
  return inner_[static_cast<size_t>(j)][static_cast<size_t>(i)];
}

const Tensor& NondeterministicStack::root_weights(int j) const {
  if (j < 0 || j > t_) throw std::out_of_range("root_weights: layer out of range");
  return roots_[static_cast<size_t>(j)];
}

int64_t NondeterministicStack::stored_inner_entries() const {
  int64_t n = 0;
  for (const auto& row : inner_) {
    for (const Tensor& t : row) n += t.numel();
  }
  return n / dims_.batch;
}

int64_t NondeterministicStack::pop_term_macs() const { return pop_macs_; }

double NondeterministicStack::node_weight(const Tensor& t, int64_t flat_index) const {
  real_t v = t.value()[flat_index];  // batch element 0
  return sr_ == Semiring::Log ? std::exp(static_cast<double>(v)) : static_cast<double>(v);
}

WfaSnapshot NondeterministicStack::wfa_snapshot(double threshold) const {
  int q = dims_.states;
  int g = dims_.stack_symbols;
  WfaSnapshot snap;
  std::vector<char> included(static_cast<size_t>(t_ + 1) * q * g, 0);
  auto mark = [&](int j, int r, int y) -> char& {
    return included[static_cast<size_t>((j * q + r) * g + y)];
  };
  for (int j = 0; j <= t_; ++j) {
    for (int r = 0; r < q; ++r) {
      for (int y = 0; y < g; ++y) {
        if (node_weight(fwd_[static_cast<size_t>(j)], int64_t(r) * g + y) > threshold) {
          snap.nodes.push_back({j, r, y});
          mark(j, r, y) = 1;
        }
      }
    }
  }
  snap.edges.push_back({true, 0, 0, 0, 0, 0, 0, node_weight(roots_[0], 0)});
  for (int j = 1; j <= t_; ++j) {
    for (int r = 0; r < q; ++r) {
      for (int y = 0; y < g; ++y) {
        double w = node_weight(roots_[static_cast<size_t>(j)], int64_t(r) * g + y);
        if (w > threshold) snap.edges.push_back({true, 0, 0, 0, j, r, y, w});
      }
    }
    for (int i = 0; i < j; ++i) {
      const Tensor& e = inner_[static_cast<size_t>(j)][static_cast<size_t>(i)];
      for (int qq = 0; qq < q; ++qq) {
        for (int x = 0; x < g; ++x) {
          if (!mark(i, qq, x)) continue;
          for (int r = 0; r < q; ++r) {
            for (int y = 0; y < g; ++y) {
              double w = node_weight(e, ((int64_t(qq) * g + x) * q + r) * g + y);
              if (w > threshold) snap.edges.push_back({false, i, qq, x, j, r, y, w});
            }
          }
        }
      }
    }
  }
  // Keep edge targets present even when their own weight was filtered.
  for (const WfaEdge& e : snap.edges) {
    if (!mark(e.j, e.r, e.y)) {
      snap.nodes.push_back({e.j, e.r, e.y});
      mark(e.j, e.r, e.y) = 1;
    }
  }
  return snap;
}

std::string wfa_to_dot(const WfaSnapshot& snap, const std::vector<std::string>& state_names,
                       const std::vector<std::string>& stack_names) {
  auto node_id = [&](int j, int r, int y) {
    return "\"" + std::to_string(j) + "," + state_names[static_cast<size_t>(r)] + "," +
           stack_names[static_cast<size_t>(y)] + "\"";
  };
  std::ostringstream out;
  out << "digraph stack_wfa {\n  rankdir=LR;\n  init [shape=point];\n";
  for (const WfaNode& n : snap.nodes) out << "  " << node_id(n.j, n.q, n.x) << ";\n";
  char buf[32];
  for (const WfaEdge& e : snap.edges) {
    std::snprintf(buf, sizeof(buf), "%.4g", e.weight);
    out << "  " << (e.from_init ? std::string("init") : node_id(e.i, e.q, e.x)) << " -> "
        << node_id(e.j, e.r, e.y) << " [label=\""
        << stack_names[static_cast<size_t>(e.y)] << "/" << buf << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace nsrnn
