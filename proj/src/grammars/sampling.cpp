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

#include "nsrnn/grammars/sampling.hpp"

#include <cmath>
#include <functional>

namespace nsrnn {

double LengthTable::at(int nt, int len) const {
  if (nt < 0 || static_cast<size_t>(nt) >= weight.size()) {
    throw std::out_of_range("length table: bad nonterminal");
  }
  if (len < 0 || len > max_len) throw std::out_of_range("length table: bad length");
  return weight[static_cast<size_t>(nt)][static_cast<size_t>(len)];
}

UnachievableLengthError::UnachievableLengthError(const std::string& nonterminal, int len)
    : std::runtime_error(nonterminal + " derives no string of length " + std::to_string(len)),
      length(len) {}

namespace {

// Visits compositions of `total` into `parts` positive entries in
// lexicographic order; the visitor returns false to stop early.
bool visit_compositions(int total, int parts, std::vector<int>& comp,
                        const std::function<bool(const std::vector<int>&)>& fn) {
  if (parts == 0) return total == 0 ? fn(comp) : true;
  int spare = total - parts;  // beyond the 1 each later part needs
  for (int v = 1; v <= 1 + spare; ++v) {
    comp.push_back(v);
    bool keep = visit_compositions(total - v, parts - 1, comp, fn);
    comp.pop_back();
    if (!keep) return false;
  }
  return true;
}

// Visits every way of expanding nt to length len: a rule plus a
// composition assigning lengths to its nonterminals, weighted by the
// rule weight times the corresponding table entries.
void visit_expansions(
    const Pcfg& g, const LengthTable& table, int nt, int len,
    const std::function<bool(const GrammarRule&, const std::vector<int>&, double)>& fn) {
  for (const GrammarRule& r : g.rules) {
    if (r.lhs != nt) continue;
    int nts = 0;
    for (const GrammarSym& s : r.rhs) {
      if (!s.is_terminal) ++nts;
    }
    int span = len - static_cast<int>(r.rhs.size()) + nts;
    if (span < nts || (nts == 0 && span != 0)) continue;
    std::vector<int> comp;
    bool keep = visit_compositions(span, nts, comp, [&](const std::vector<int>& c) {
      double w = r.weight;
      int i = 0;
      for (const GrammarSym& s : r.rhs) {
        if (s.is_terminal) continue;
        w *= table.at(s.nonterminal, c[static_cast<size_t>(i++)]);
        if (w == 0) break;
      }
      if (w == 0) return true;
      return fn(r, c, w);
    });
    if (!keep) return;
  }
}

void require_refactored(const Pcfg& g) {
  if (g.has_epsilon_rules() || g.has_unary_rules()) {
    throw std::invalid_argument("length sampling needs an epsilon-free, unary-free grammar");
  }
}

}  // namespace

std::vector<std::vector<int>> compositions(int total, int parts) {
  std::vector<std::vector<int>> out;
  std::vector<int> comp;
  visit_compositions(total, parts, comp, [&](const std::vector<int>& c) {
    out.push_back(c);
    return true;
  });
  return out;
}

LengthTable compute_table(const Pcfg& g, int max_len) {
  if (max_len < 1) throw std::invalid_argument("length table needs max_len >= 1");
  require_refactored(g);
  validate_pcfg(g);
  LengthTable table;
  table.max_len = max_len;
  table.weight.assign(g.nonterminals.size(),
                      std::vector<double>(static_cast<size_t>(max_len) + 1, 0));
  for (int len = 1; len <= max_len; ++len) {
    for (size_t x = 0; x < g.nonterminals.size(); ++x) {
      double total = 0;
      visit_expansions(g, table, static_cast<int>(x), len,
                       [&](const GrammarRule&, const std::vector<int>&, double w) {
                         total += w;
                         return true;
                       });
      table.weight[x][static_cast<size_t>(len)] = total;
    }
  }
  return table;
}

namespace {

void sample_into(const Pcfg& g, const LengthTable& table, int nt, int len, Rng& rng,
                 std::string& out) {
  double total = table.at(nt, len);
  if (total <= 0) {
    throw UnachievableLengthError(g.nonterminals[static_cast<size_t>(nt)], len);
  }
  double target = rng.uniform() * total;
  const GrammarRule* pick = nullptr;
  std::vector<int> pick_comp;
  double cum = 0;
  visit_expansions(g, table, nt, len,
                   [&](const GrammarRule& r, const std::vector<int>& c, double w) {
                     cum += w;
                     pick = &r;
                     pick_comp = c;
                     return cum <= target;  // keep scanning until we pass it
                   });
  if (!pick) throw std::logic_error("length table entry positive but no expansion found");
  int i = 0;
  for (const GrammarSym& s : pick->rhs) {
    if (s.is_terminal) {
      out.push_back(s.terminal);
    } else {
      sample_into(g, table, s.nonterminal, pick_comp[static_cast<size_t>(i++)], rng, out);
    }
  }
}

}  // namespace

std::string sample_sized(const Pcfg& g, const LengthTable& table, int nt, int len, Rng& rng) {
  require_refactored(g);
  std::string out;
  out.reserve(static_cast<size_t>(len));
  sample_into(g, table, nt, len, rng, out);
  return out;
}

int achievable_lengths(const LengthTable& table, int lmin, int lmax) {
  if (lmin < 1 || lmax < lmin || lmax > table.max_len) {
    throw std::invalid_argument("bad length range");
  }
  int count = 0;
  for (int len = lmin; len <= lmax; ++len) {
    if (table.at(0, len) > 0) ++count;
  }
  return count;
}

std::vector<std::string> sample_dataset(const Pcfg& g, const LengthTable& table, int lmin,
                                        int lmax, int count, Rng& rng) {
  if (achievable_lengths(table, lmin, lmax) == 0) {
    throw std::invalid_argument("no length in range is achievable");
  }
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    int len = lmin + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(lmax - lmin + 1)));
    if (table.at(0, len) <= 0) continue;  // restart with a fresh length
    out.push_back(sample_sized(g, table, 0, len, rng));
  }
  return out;
}

double p_sample(const Pcfg& g, const LengthTable& table, int lmin, int lmax,
                const std::string& w) {
  int len = static_cast<int>(w.size());
  if (len < lmin || len > lmax) throw std::invalid_argument("string length out of range");
  double mass = table.at(0, len);
  if (mass <= 0) throw UnachievableLengthError(g.nonterminals[0], len);
  int count = achievable_lengths(table, lmin, lmax);
  return inside(g, w) / (count * mass);
}

double log_p_sample(const Pcfg& g, const LengthTable& table, int lmin, int lmax,
                    const std::string& w) {
  return std::log(p_sample(g, table, lmin, lmax, w));
}

}  // namespace nsrnn
