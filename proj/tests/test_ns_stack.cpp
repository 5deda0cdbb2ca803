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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "nsrnn/ns_stack/ns_stack.hpp"
#include "oracles.hpp"

using namespace nsrnn;

namespace {

constexpr real_t kNegInf = -std::numeric_limits<real_t>::infinity();

// Stacks per-batch action tensors into one [B, Q, G, Q, 2G+1] value.
TensorValue stack_batch(const std::vector<TensorValue>& per_batch) {
  Shape shape = per_batch[0].shape;
  shape.insert(shape.begin(), static_cast<int64_t>(per_batch.size()));
  TensorValue out = TensorValue::zeros(shape);
  size_t stride = static_cast<size_t>(per_batch[0].numel());
  for (size_t b = 0; b < per_batch.size(); ++b) {
    std::copy(per_batch[b].data.begin(), per_batch[b].data.end(),
              out.data.begin() + static_cast<int64_t>(b * stride));
  }
  return out;
}

// Runs the stack over an input and returns exp(forward weights) per layer.
std::vector<TensorValue> run_forward(const WeightedPda& pda, const std::string& w,
                                     Semiring sr) {
  std::vector<TensorValue> deltas = pack_transitions(pda, w, sr);
  NondeterministicStack stack({1, pda.num_states(), pda.num_stack_symbols()}, sr);
  for (TensorValue& d : deltas) stack.step(constant(with_batch_axis(std::move(d))));
  std::vector<TensorValue> out;
  for (int j = 0; j <= stack.layers(); ++j) {
    TensorValue v = stack.forward_weights(j).value();
    if (sr == Semiring::Log) {
      for (real_t& x : v.data) x = std::exp(x);
    }
    out.push_back(std::move(v));
  }
  return out;
}

TensorValue random_log_delta(const StackDims& d, Rng& rng) {
  TensorValue v = TensorValue::zeros(
      {d.batch, d.states, d.stack_symbols, d.states, 2 * d.stack_symbols + 1});
  for (real_t& x : v.data) x = rng.uniform(real_t(-2), real_t(0));
  return v;
}

}  // namespace

TEST_CASE("packing maps each action kind to its slot") {
  WeightedPda pda = example_pda();
  std::vector<TensorValue> deltas = pack_transitions(pda, "01", Semiring::Real);
  REQUIRE(deltas.size() == 2);
  const int G = 3;
  CHECK(deltas[0].shape == Shape{2, 3, 2, 7});
  // Scanning '0': q1 pushes "0" (slot 1) from any top, and both states
  // pop (slot 2G) on a matching "0" top.
  CHECK(deltas[0].at({0, 0, 0, 1}) == 1);
  CHECK(deltas[0].at({0, 1, 0, 1}) == 1);
  CHECK(deltas[0].at({0, 2, 0, 1}) == 1);
  CHECK(deltas[0].at({0, 1, 1, 2 * G}) == 1);
  CHECK(deltas[0].at({1, 1, 1, 2 * G}) == 1);
  CHECK(deltas[0].at({1, 2, 1, 2 * G}) == 0);  // pop needs a matching top
  CHECK(deltas[0].at({0, 0, 0, 2}) == 0);      // no push of "1" on '0'
  // Scanning '1': pushes go to slot 2, pops require top "1".
  CHECK(deltas[1].at({0, 0, 0, 2}) == 1);
  CHECK(deltas[1].at({0, 2, 1, 2 * G}) == 1);

  std::vector<TensorValue> logs = pack_transitions(pda, "0", Semiring::Log);
  CHECK(logs[0].at({0, 0, 0, 1}) == 0);
  CHECK(logs[0].at({0, 0, 0, 2}) == kNegInf);
}

TEST_CASE("packing rejects symbols outside the PDA alphabet") {
  CHECK_THROWS(pack_transitions(example_pda(), "0x1", Semiring::Real));
}

TEST_CASE("reading traces the renormalized palindrome PDA") {
  WeightedPda pda = normalize_groups(example_pda());
  pda.finalize();
  std::vector<TensorValue> deltas = pack_transitions(pda, "011", Semiring::Log);
  NondeterministicStack stack({1, 2, 3}, Semiring::Log);

  TensorValue r0 = stack.reading().value();
  CHECK(r0.at({0, 0}) == 1);  // layer 0 reads the bottom marker
  CHECK(r0.at({0, 1}) == 0);

  Tensor r1 = stack.step(constant(with_batch_axis(std::move(deltas[0]))));
  // Only one group applies at the start, so "0" is on top for sure.
  CHECK(r1.value().at({0, 1}) == doctest::Approx(1).epsilon(1e-12));

  stack.step(constant(with_batch_axis(std::move(deltas[1]))));
  Tensor r3 = stack.step(constant(with_batch_axis(std::move(deltas[2]))));
  // Third symbol '1' over top "1" splits half push / half pop, leaving
  // "1" or the uncovered "0" on top with equal weight.
  CHECK(r3.value().at({0, 0}) == doctest::Approx(0).epsilon(1e-12));
  CHECK(r3.value().at({0, 1}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r3.value().at({0, 2}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("forward weights on the palindrome example match the run oracle") {
  WeightedPda pda = example_pda();
  for (Semiring sr : {Semiring::Real, Semiring::Log}) {
    std::vector<TensorValue> fwd = run_forward(pda, "0110", sr);
    OracleWeights oracle = oracle_config_weights(pda, "0110");
    for (int j = 0; j <= 4; ++j) {
      for (int q = 0; q < 2; ++q) {
        for (int x = 0; x < 3; ++x) {
          CHECK(fwd[size_t(j)].at({0, q, x}) ==
                doctest::Approx(oracle.at(j, q, x)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("forward weights match the run oracle on random probabilistic PDAs") {
  Rng rng(433);
  for (int trial = 0; trial < 60; ++trial) {
    WeightedPda pda = nsrnn::testing::random_probabilistic_pda(rng);
    std::string w = nsrnn::testing::random_input(pda, 6, rng);
    OracleWeights oracle = oracle_config_weights(pda, w);
    std::vector<TensorValue> fwd;
    try {
      fwd = run_forward(pda, w, Semiring::Log);
    } catch (const DeadStackError& dead) {
      // Every run died; the oracle must agree that nothing survives.
      real_t alive = 0;
      for (int q = 0; q < pda.num_states(); ++q) {
        for (int x = 0; x < pda.num_stack_symbols(); ++x) {
          alive += oracle.at(dead.step(), q, x);
        }
      }
      CHECK(alive == 0);
      continue;
    }
    for (size_t j = 0; j < fwd.size(); ++j) {
      for (int q = 0; q < pda.num_states(); ++q) {
        for (int x = 0; x < pda.num_stack_symbols(); ++x) {
          CHECK(std::fabs(fwd[j].at({0, q, x}) - oracle.at(int(j), q, x)) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("a starved stack raises DeadStackError with the failing step") {
  StackDims dims{1, 1, 2};
  NondeterministicStack stack(dims, Semiring::Log);
  TensorValue dead = TensorValue::full({1, 1, 2, 1, 5}, kNegInf);
  try {
    stack.step(constant(dead));
    FAIL("expected DeadStackError");
  } catch (const DeadStackError& e) {
    CHECK(e.step() == 1);
    CHECK(e.batch_index() == 0);
  }
}

TEST_CASE("reading gradients match finite differences") {
  StackDims dims{1, 2, 3};
  Rng rng(71);
  std::vector<TensorValue> leaves;
  for (int j = 0; j < 3; ++j) leaves.push_back(random_log_delta(dims, rng));
  TensorValue proj = TensorValue::zeros({1, 3});
  for (real_t& x : proj.data) x = rng.uniform(real_t(-1), real_t(1));
  leaves.push_back(proj);

  auto build = [&](const std::vector<Tensor>& in) {
    NondeterministicStack stack(dims, Semiring::Log);
    Tensor loss;
    for (int j = 0; j < 3; ++j) {
      Tensor reading = stack.step(in[size_t(j)]);
      Tensor term = sum_all(mul(reading, in[3]));
      loss = loss.defined() ? add(loss, term) : term;
    }
    return loss;
  };
  nsrnn::testing::GradReport r = nsrnn::testing::check_input_gradients(leaves, build);
  CHECK(r.bad_fraction() < 0.01);
  CHECK(r.worst < 1e-2);
}

TEST_CASE("inner-weight storage and pop-stage work follow the closed forms") {
  StackDims dims{2, 2, 3};
  Rng rng(97);
  NondeterministicStack stack(dims, Semiring::Log);
  auto step_random = [&]() { stack.step(constant(random_log_delta(dims, rng))); };
  int64_t q3g2 = int64_t(dims.batch) * dims.states * dims.states * dims.states *
                 dims.stack_symbols * dims.stack_symbols;
  auto macs_closed_form = [&](int64_t n) { return q3g2 * n * (n - 1) * (n - 2) / 6; };

  for (int j = 0; j < 20; ++j) step_random();
  int64_t entries20 = stack.stored_inner_entries();
  CHECK(entries20 == 210 * int64_t(dims.states) * dims.states * dims.stack_symbols *
                         dims.stack_symbols);
  CHECK(stack.pop_term_macs() == macs_closed_form(20));

  for (int j = 0; j < 20; ++j) step_random();
  int64_t entries40 = stack.stored_inner_entries();
  CHECK(entries40 * 210 == entries20 * 820);  // exact 210 : 820 scaling
  CHECK(stack.pop_term_macs() == macs_closed_form(40));
}

TEST_CASE("the automaton snapshot of the palindrome run matches the known picture") {
  WeightedPda pda = example_pda();
  std::vector<TensorValue> deltas = pack_transitions(pda, "0110", Semiring::Real);
  NondeterministicStack stack({1, 2, 3}, Semiring::Real);
  for (TensorValue& d : deltas) stack.step(constant(with_batch_axis(std::move(d))));
  WfaSnapshot snap = stack.wfa_snapshot(0);

  std::set<std::string> nodes;
  for (const WfaNode& n : snap.nodes) {
    nodes.insert(std::to_string(n.j) + "," + std::to_string(n.q) + "," + std::to_string(n.x));
  }
  std::set<std::string> expect_nodes = {"0,0,0", "1,0,1", "2,0,2", "3,0,2",
                                        "3,1,1", "4,0,1", "4,1,0"};
  CHECK(nodes == expect_nodes);

  std::set<std::string> edges;
  for (const WfaEdge& e : snap.edges) {
    std::string src = e.from_init ? "init"
                                  : std::to_string(e.i) + "," + std::to_string(e.q) + "," +
                                        std::to_string(e.x);
    edges.insert(src + ">" + std::to_string(e.j) + "," + std::to_string(e.r) + "," +
                 std::to_string(e.y));
    CHECK(e.weight == doctest::Approx(1).epsilon(1e-12));
  }
  std::set<std::string> expect_edges = {"init>0,0,0", "0,0,0>1,0,1", "1,0,1>2,0,2",
                                        "2,0,2>3,0,2", "0,0,0>3,1,1", "3,0,2>4,0,1",
                                        "init>4,1,0"};
  CHECK(edges == expect_edges);
  CHECK(snap.nodes.size() == 7);  // plus the implicit initial node
  CHECK(snap.edges.size() == 7);
}

TEST_CASE("batched inputs evolve independently") {
  WeightedPda pda = normalize_groups(example_pda());
  pda.finalize();
  std::string w1 = "0110", w2 = "0011";
  std::vector<TensorValue> d1 = pack_transitions(pda, w1, Semiring::Log);
  std::vector<TensorValue> d2 = pack_transitions(pda, w2, Semiring::Log);

  NondeterministicStack both({2, 2, 3}, Semiring::Log);
  for (size_t j = 0; j < w1.size(); ++j) {
    both.step(constant(stack_batch({d1[j], d2[j]})));
  }
  NondeterministicStack s1({1, 2, 3}, Semiring::Log);
  for (TensorValue& d : pack_transitions(pda, w1, Semiring::Log)) {
    s1.step(constant(with_batch_axis(std::move(d))));
  }
  NondeterministicStack s2({1, 2, 3}, Semiring::Log);
  for (TensorValue& d : pack_transitions(pda, w2, Semiring::Log)) {
    s2.step(constant(with_batch_axis(std::move(d))));
  }
  // Plain equality would reject matching -inf entries under Approx.
  auto close = [](real_t got, real_t want) {
    return got == want || std::fabs(got - want) < real_t(1e-12);
  };
  for (int j = 0; j <= 4; ++j) {
    const TensorValue& pair = both.forward_weights(j).value();
    const TensorValue& a = s1.forward_weights(j).value();
    const TensorValue& b = s2.forward_weights(j).value();
    for (int q = 0; q < 2; ++q) {
      for (int x = 0; x < 3; ++x) {
        CHECK(close(pair.at({0, q, x}), a.at({0, q, x})));
        CHECK(close(pair.at({1, q, x}), b.at({0, q, x})));
      }
    }
  }
}
