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

#include <cmath>
#include <string>

#include "nsrnn/wpda/wpda.hpp"
#include "oracles.hpp"

using namespace nsrnn;

TEST_CASE("palindrome example PDA has the expected shape") {
  WeightedPda pda = example_pda();
  CHECK(pda.num_states() == 2);
  CHECK(pda.alphabet == "01");
  CHECK(pda.num_stack_symbols() == 3);
  CHECK(pda.transitions.size() == 10);
  // Six unconditional pushes, four matching pops.
  int pushes = 0, pops = 0;
  for (const Transition& t : pda.transitions) {
    if (t.action.kind == ActionKind::Push) ++pushes;
    if (t.action.kind == ActionKind::Pop) ++pops;
    CHECK(t.weight == 1);
  }
  CHECK(pushes == 6);
  CHECK(pops == 4);
}

TEST_CASE("run enumeration on an even palindrome finds both run shapes") {
  WeightedPda pda = example_pda();
  RunEnumeration runs = enumerate_runs(pda, "0110", 1000);
  REQUIRE(runs.complete.size() == 2);
  // One run pushes all four symbols, the other pops the second half.
  bool saw_all_push = false, saw_match = false;
  for (const Run& r : runs.complete) {
    const Configuration& last = r.configs.back();
    CHECK(r.weight == 1);
    CHECK(last.position == 4);
    if (last.state == 0) {
      CHECK(last.stack.size() == 5);
      saw_all_push = true;
    } else {
      CHECK(last.stack.size() == 1);
      CHECK(last.stack[0] == 0);
      saw_match = true;
    }
  }
  CHECK(saw_all_push);
  CHECK(saw_match);
}

TEST_CASE("run enumeration counts for short strings") {
  WeightedPda pda = example_pda();
  CHECK(enumerate_runs(pda, "01", 1000).complete.size() == 1);
  CHECK(enumerate_runs(pda, "00", 1000).complete.size() == 2);
  CHECK(enumerate_runs(pda, "", 1000).complete.size() == 1);
  CHECK(enumerate_runs(pda, "0", 1000).complete.size() == 1);
}

TEST_CASE("oracle weights count runs under unit weights") {
  WeightedPda pda = example_pda();
  OracleWeights o = oracle_config_weights(pda, "0110");
  CHECK(o.at(0, 0, 0) == 1);  // initial configuration, bottom marker
  CHECK(o.at(1, 0, 1) == 1);  // pushed 0
  CHECK(o.at(2, 0, 2) == 1);  // pushed 1
  CHECK(o.at(3, 0, 2) == 1);  // pushed the second 1
  CHECK(o.at(3, 1, 1) == 1);  // popped back to 0
  CHECK(o.at(4, 0, 1) == 1);  // pushed the final 0
  CHECK(o.at(4, 1, 0) == 1);  // matched the whole string
  CHECK(o.at(4, 1, 1) == 0);
  CHECK(o.at(2, 1, 0) == 0);
}

TEST_CASE("random probabilistic PDAs conserve probability mass over runs") {
  Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    WeightedPda pda = nsrnn::testing::random_probabilistic_pda(rng);
    ProbabilisticReport report = validate_probabilistic(pda);
    CHECK(report.ok);
    std::string w = nsrnn::testing::random_input(pda, 5, rng);
    RunEnumeration runs = enumerate_runs(pda, w, 2000000);
    real_t total = runs.terminated_weight;
    for (const Run& r : runs.complete) total += r.weight;
    CHECK(std::fabs(total - 1) < 1e-12);
  }
}

TEST_CASE("group normalization makes every nonempty group sum to one") {
  WeightedPda pda = example_pda();
  for (Transition& t : pda.transitions) t.weight = real_t(0.5);
  pda.finalize();
  WeightedPda norm = normalize_groups(pda);
  norm.finalize();
  CHECK(validate_probabilistic(norm).ok);
  // Group (q1, input 0, top "0") holds a push and a pop at equal raw weight.
  real_t sum = 0;
  for (int ti : norm.group(0, 0, 1)) sum += norm.transitions[size_t(ti)].weight;
  CHECK(sum == doctest::Approx(1).epsilon(1e-14));
}

TEST_CASE("PDA text format round-trips") {
  WeightedPda pda = example_pda();
  std::string text = format_pda(pda);
  WeightedPda back = parse_pda(text);
  CHECK(format_pda(back) == text);
  CHECK(back.num_states() == pda.num_states());
  CHECK(back.transitions.size() == pda.transitions.size());

  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    WeightedPda r = nsrnn::testing::random_probabilistic_pda(rng);
    CHECK(format_pda(parse_pda(format_pda(r))) == format_pda(r));
  }
}

TEST_CASE("PDA parser rejects malformed input") {
  CHECK_THROWS(parse_pda("states: q1\ninput: 0\n"));  // missing stack header
  CHECK_THROWS(parse_pda(
      "states: q1\ninput: 0\nstack: _ 0\nq1 0 _ -> q1 shove 0 1\n"));  // bad action
  CHECK_THROWS(parse_pda(
      "states: q1\ninput: 0\nstack: _ 0\nq9 0 _ -> q1 push 0 1\n"));  // unknown state
}
