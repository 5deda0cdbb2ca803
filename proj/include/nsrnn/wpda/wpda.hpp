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

#ifndef NSRNN_WPDA_WPDA_HPP_
#define NSRNN_WPDA_WPDA_HPP_

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "nsrnn/config.hpp"

namespace nsrnn {

enum class ActionKind { Push, Replace, Pop };

// Pop carries no symbol; Push y adds y above the current top x, and
// Replace y rewrites x to y.
struct StackAction {
  ActionKind kind;
  int symbol = -1;  // -1 for Pop
};

struct Transition {
  int state;   // q
  int input;   // index into the alphabet
  int top;     // x, the stack symbol being inspected
  int next_state;
  StackAction action;
  real_t weight;
};

// Weighted pushdown automaton.  Every transition scans one input
// symbol and takes one of the three forms above.  State 0 is the start
// state and stack symbol 0 is the bottom marker.  There are no accept
// states; weight accounting is over configurations.
class WeightedPda {
 public:
  std::vector<std::string> state_names;  // index 0 = start state
  std::string alphabet;                  // one char per input symbol
  std::vector<std::string> stack_names;  // index 0 = bottom marker

  std::vector<Transition> transitions;

  int num_states() const { return static_cast<int>(state_names.size()); }
  int num_inputs() const { return static_cast<int>(alphabet.size()); }
  int num_stack_symbols() const { return static_cast<int>(stack_names.size()); }

  int input_index(char c) const;  // -1 when absent

  // Range/form checks; throws std::invalid_argument on the first
  // violation.
  void validate() const;

  // Builds the (state, input, top) -> transition index used by run
  // enumeration and action-tensor packing.  Must be called after the
  // transition list is final; the object is immutable afterwards.
  void finalize();
  bool finalized() const { return finalized_; }

  // Transition indices for one configuration; empty when none apply.
  const std::vector<int>& group(int state, int input, int top) const;

 private:
  int group_key(int state, int input, int top) const;

  std::unordered_map<int, std::vector<int>> by_config_;
  std::vector<int> empty_group_;
  bool finalized_ = false;
};

struct ProbabilisticViolation {
  int state;
  int input;
  int top;
  real_t sum;
};

struct ProbabilisticReport {
  bool ok = true;
  std::vector<ProbabilisticViolation> violations;
};

// True iff for every (state, input, top) with at least one transition
// the outgoing weights sum to 1 within `tol`.  Configurations with no
// transitions are vacuously fine.
ProbabilisticReport validate_probabilistic(const WeightedPda& pda, real_t tol = real_t(1e-9));

// Divides each (state, input, top) group's weights by the group sum.
WeightedPda normalize_groups(const WeightedPda& pda);

struct Configuration {
  int position;
  int state;
  std::vector<int> stack;  // bottom to top
};

struct Run {
  std::vector<Configuration> configs;  // starts at (0, start, bottom)
  real_t weight;                       // product of transition weights
};

struct RunEnumeration {
  // Runs that scanned all of the input with a nonempty stack at every
  // configuration.
  std::vector<Run> complete;
  // Total weight of runs that died early: popped the bottom marker, or
  // reached a configuration with no applicable transition.
  real_t terminated_weight = 0;
};

// Exhaustive depth-first enumeration of all runs on `w`.  Throws when
// the number of explored runs exceeds `cap` (never truncates).
RunEnumeration enumerate_runs(const WeightedPda& pda, const std::string& w, int64_t cap);

// Total weight, per position j and configuration (state r, top symbol
// y), of all partial runs over the first j input symbols that reach r
// with y on top.  Brute force over the run prefix tree; this is the
// correctness oracle for the differentiable stack's forward weights.
class OracleWeights {
 public:
  OracleWeights(int positions, int states, int stack_symbols)
      : states_(states),
        stack_symbols_(stack_symbols),
        w_(static_cast<size_t>(positions) * states * stack_symbols, 0) {}

  real_t& at(int j, int r, int y) {
    return w_[static_cast<size_t>((j * states_ + r) * stack_symbols_ + y)];
  }
  real_t at(int j, int r, int y) const {
    return w_[static_cast<size_t>((j * states_ + r) * stack_symbols_ + y)];
  }

 private:
  int states_;
  int stack_symbols_;
  std::vector<real_t> w_;
};

OracleWeights oracle_config_weights(const WeightedPda& pda, const std::string& w,
                                    int64_t cap = 10000000);

// The two-state palindrome PDA used throughout the tests: state q1
// pushes every symbol it reads and may pop when the read symbol
// matches the top, state q2 only pops on a match.  Unit weights.
WeightedPda example_pda();

// Text format, one transition per line after three header lines:
//   states: q1 q2
//   input: 0 1
//   stack: _ 0 1
//   q1 0 _ -> q1 push 0 1
//   q1 0 0 -> q2 pop 0.5
// '#' starts a comment.  The first state is the start state and the
// first stack symbol is the bottom marker.
WeightedPda parse_pda(const std::string& text);
std::string format_pda(const WeightedPda& pda);
WeightedPda load_pda_file(const std::string& path);

}  // namespace nsrnn

#endif  // NSRNN_WPDA_WPDA_HPP_
