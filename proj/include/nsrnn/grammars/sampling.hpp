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

#ifndef NSRNN_GRAMMARS_SAMPLING_HPP_
#define NSRNN_GRAMMARS_SAMPLING_HPP_

#include <stdexcept>
#include <string>
#include <vector>

#include "nsrnn/grammars/pcfg.hpp"
#include "nsrnn/tensor/rng.hpp"

namespace nsrnn {

// Total weight of each nonterminal deriving a string of each exact
// length, up to max_len.  Length 0 is always 0 (the table is built
// from epsilon-free grammars).
struct LengthTable {
  int max_len = 0;
  std::vector<std::vector<double>> weight;  // [nonterminal][length]

  double at(int nt, int len) const;
};

struct UnachievableLengthError : std::runtime_error {
  UnachievableLengthError(const std::string& nonterminal, int len);
  int length;
};

// All ordered sequences of `parts` positive integers summing to
// `total`, in lexicographic order.  parts = 0 yields one empty
// composition when total is 0 and none otherwise.
std::vector<std::vector<int>> compositions(int total, int parts);

// Fills the table by increasing length: each entry sums, over rules
// and over compositions of the length left after the rule's
// terminals, the rule weight times the table entries of its
// nonterminals.  Requires an epsilon-free, unary-free grammar.
LengthTable compute_table(const Pcfg& g, int max_len);

// Draws a string of length exactly `len` from `nt`, distributed as
// the grammar conditioned on that length: a rule and composition are
// chosen with probability proportional to their table weight, then
// each nonterminal is expanded recursively.  Throws
// UnachievableLengthError when the table entry is 0.
std::string sample_sized(const Pcfg& g, const LengthTable& table, int nt, int len, Rng& rng);

// Number of lengths in [lmin, lmax] the start symbol can produce.
int achievable_lengths(const LengthTable& table, int lmin, int lmax);

// Draws `count` strings, each by picking a length uniformly from
// [lmin, lmax] and redrawing whenever the length is unachievable (a
// full restart, so the effective length distribution is uniform over
// the achievable lengths).  Throws when no length in range works.
std::vector<std::string> sample_dataset(const Pcfg& g, const LengthTable& table, int lmin,
                                        int lmax, int count, Rng& rng);

// Probability of w under sample_dataset's effective distribution:
// the inside weight of w over the total weight of its length, divided
// by the number of achievable lengths.  |w| must be achievable and in
// range.
double p_sample(const Pcfg& g, const LengthTable& table, int lmin, int lmax,
                const std::string& w);
double log_p_sample(const Pcfg& g, const LengthTable& table, int lmin, int lmax,
                    const std::string& w);

}  // namespace nsrnn

#endif  // NSRNN_GRAMMARS_SAMPLING_HPP_
