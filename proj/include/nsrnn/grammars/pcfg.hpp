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

#ifndef NSRNN_GRAMMARS_PCFG_HPP_
#define NSRNN_GRAMMARS_PCFG_HPP_

#include <map>
#include <string>
#include <vector>

namespace nsrnn {

// One grammar symbol: either a single-character terminal or an index
// into Pcfg::nonterminals.
struct GrammarSym {
  bool is_terminal = false;
  int nonterminal = -1;
  char terminal = 0;

  static GrammarSym nt(int id) { return {false, id, 0}; }
  static GrammarSym term(char c) { return {true, -1, c}; }
  bool operator==(const GrammarSym& o) const {
    return is_terminal == o.is_terminal && nonterminal == o.nonterminal && terminal == o.terminal;
  }
  bool operator<(const GrammarSym& o) const {
    if (is_terminal != o.is_terminal) return is_terminal < o.is_terminal;
    if (nonterminal != o.nonterminal) return nonterminal < o.nonterminal;
    return terminal < o.terminal;
  }
};

struct GrammarRule {
  int lhs = 0;
  std::vector<GrammarSym> rhs;  // empty sequence derives the empty string
  double weight = 0;
};

// A weighted CFG.  Task grammars are probabilistic (weights per
// left-hand side sum to 1); refactored grammars may be
// sub-probabilistic when mass on the empty string has been removed.
struct Pcfg {
  std::vector<std::string> nonterminals;  // index 0 is the start symbol
  std::string terminals;                  // distinct characters
  std::vector<GrammarRule> rules;

  int find_nonterminal(const std::string& name) const;  // -1 when absent
  int add_nonterminal(const std::string& name);
  void add_terminal(char c);
  bool has_epsilon_rules() const;
  bool has_unary_rules() const;  // single-nonterminal right-hand sides
};

// Structural checks: at least one nonterminal, symbol ids in range,
// weights positive, terminals declared.  Throws on violation.
void validate_pcfg(const Pcfg& g);

// Messages for every left-hand side whose weights do not sum to 1
// within tol; empty means probabilistic.
std::vector<std::string> probabilistic_violations(const Pcfg& g, double tol = 1e-9);

// Weight for a recursive rule so that it applies `mean` times on
// average before the non-recursive alternative fires.
double recursion_weight(double mean);
// The complementary stop weight, computed directly as 1/(mean+1) so
// that exact rational values survive in floating point.
double stop_weight(double mean);

// The five data-generating task grammars.  `params` overrides the
// default mean parameters by name (per task: marked-reversal /
// unmarked-reversal: content; padded-reversal: content, padding;
// dyck: splits, nesting; hardest-cfl: commas, short-filler,
// long-filler, semicolon, splits, nesting).  Unknown task or
// parameter names and non-positive values throw.
Pcfg build_task_grammar(const std::string& task,
                        const std::map<std::string, double>& params = {});
std::vector<std::string> task_names();

// Removes epsilon rules and unary (single-nonterminal) rules while
// preserving the weight of every non-empty string.  The resulting
// grammar is sub-probabilistic when the input put mass on the empty
// string; that mass is returned through `empty_mass` when non-null.
// Unary cycles with total weight >= 1 and grammars generating no
// non-empty string are rejected.
Pcfg refactor_remove_epsilon_unary(const Pcfg& g, double* empty_mass = nullptr);

// Total derivation weight of w.  Requires an epsilon-free,
// unary-free grammar (refactor first); non-members return 0.
double inside(const Pcfg& g, const std::string& w);

// Text format: one rule per line, `LHS -> RHS... / weight`, tokens
// whitespace-separated; symbols that appear on a left-hand side are
// nonterminals (the first line's LHS is the start symbol), all other
// tokens must be single-character terminals.  An empty RHS derives
// the empty string.  Lines starting with '#' are comments.
Pcfg parse_pcfg(const std::string& text);
std::string format_pcfg(const Pcfg& g);
Pcfg load_pcfg_file(const std::string& path);
void save_pcfg_file(const Pcfg& g, const std::string& path);

}  // namespace nsrnn

#endif  // NSRNN_GRAMMARS_PCFG_HPP_
