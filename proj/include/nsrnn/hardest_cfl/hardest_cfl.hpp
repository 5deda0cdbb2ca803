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

#ifndef NSRNN_HARDEST_CFL_HARDEST_CFL_HPP_
#define NSRNN_HARDEST_CFL_HARDEST_CFL_HPP_

#include <map>
#include <string>
#include <vector>

#include "nsrnn/wpda/wpda.hpp"

namespace nsrnn {

// Grammar in Greibach normal form: every rule is one terminal
// followed by nonterminals, and the start symbol (index 0) appears on
// no right-hand side.
struct GnfRule {
  int lhs = 0;
  char terminal = 0;
  std::vector<int> rhs;  // nonterminal ids
};

struct GnfGrammar {
  std::vector<std::string> nonterminals;  // index 0 = start
  std::vector<GnfRule> rules;

  void validate() const;  // throws std::invalid_argument
};

// Bracket fragments standing for stack moves on a nonterminal, using
// its 1-based position: push is "(" "["^i "(", pop is ")" "]"^i ")",
// except the start symbol pops as "$".
std::string push_code(int nonterminal1);
std::string pop_code(int nonterminal1);

// Per-terminal images over the block alphabet ( ) [ ] $ , ;
struct Homomorphism {
  std::map<char, std::string> images;
};

// Encodes each rule as the pop of its left-hand side followed by the
// pushes of its right-hand side; a terminal's image is its rules'
// encodings joined by commas, wrapped in a leading comma and a
// trailing comma, then terminated by ";".  The wrapping commas keep
// every block splittable as decoy, genuine, decoy even for
// single-rule terminals.  A terminal with no rules has no image and
// is an error.
Homomorphism build_homomorphism(const GnfGrammar& g);
std::string apply_homomorphism(const Homomorphism& h, const std::string& w);

// The block-structure automaton: between blocks, it either skims
// symbols as decoy or commits a comma-delimited segment as genuine,
// checking that the genuine segments concatenate to "$" followed by a
// balanced bracket string.  State 0 sits between blocks; the stack
// records the pending open brackets above a seen-"$" marker.
WeightedPda l0_pda();

// True iff s is a sequence of ";"-terminated blocks with a genuine
// segment choice whose concatenation is "$" + balanced brackets.
// Runs l0_pda through the stack recurrences in the real semiring and
// reads acceptance off the final forward weights.  The empty string
// is not a member ("$" cannot be empty).
bool l0_membership(const std::string& s, int block = 256);

// Fixture for the reduction property: S -> a A A | b; A -> a A | b.
GnfGrammar toy_gnf_grammar();

// Exhaustive span parsing (CKY style, memoized): true iff the start
// symbol derives w.
bool gnf_derives(const GnfGrammar& g, const std::string& w);

// Text format: one rule per line, `LHS -> a NT...`; the first line's
// LHS is the start symbol.  Lines starting with '#' are comments.
GnfGrammar parse_gnf(const std::string& text);
GnfGrammar load_gnf_file(const std::string& path);

}  // namespace nsrnn

#endif  // NSRNN_HARDEST_CFL_HARDEST_CFL_HPP_
