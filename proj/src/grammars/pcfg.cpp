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

#include "nsrnn/grammars/pcfg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace nsrnn {

int Pcfg::find_nonterminal(const std::string& name) const {
  for (size_t i = 0; i < nonterminals.size(); ++i) {
    if (nonterminals[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Pcfg::add_nonterminal(const std::string& name) {
  int id = find_nonterminal(name);
  if (id >= 0) return id;
  nonterminals.push_back(name);
  return static_cast<int>(nonterminals.size()) - 1;
}

void Pcfg::add_terminal(char c) {
  if (terminals.find(c) == std::string::npos) terminals.push_back(c);
}

bool Pcfg::has_epsilon_rules() const {
  for (const GrammarRule& r : rules) {
    if (r.rhs.empty()) return true;
  }
  return false;
}

bool Pcfg::has_unary_rules() const {
  for (const GrammarRule& r : rules) {
    if (r.rhs.size() == 1 && !r.rhs[0].is_terminal) return true;
  }
  return false;
}

void validate_pcfg(const Pcfg& g) {
  if (g.nonterminals.empty()) throw std::invalid_argument("grammar has no nonterminals");
  int n = static_cast<int>(g.nonterminals.size());
  for (const GrammarRule& r : g.rules) {
    if (r.lhs < 0 || r.lhs >= n) throw std::invalid_argument("rule lhs out of range");
    if (!(r.weight > 0)) {
      throw std::invalid_argument("rule for " + g.nonterminals[r.lhs] + " has non-positive weight");
    }
    for (const GrammarSym& s : r.rhs) {
      if (s.is_terminal) {
        if (g.terminals.find(s.terminal) == std::string::npos) {
          throw std::invalid_argument("undeclared terminal in rule");
        }
      } else if (s.nonterminal < 0 || s.nonterminal >= n) {
        throw std::invalid_argument("rule references unknown nonterminal");
      }
    }
  }
}

std::vector<std::string> probabilistic_violations(const Pcfg& g, double tol) {
  std::vector<double> sums(g.nonterminals.size(), 0);
  std::vector<bool> seen(g.nonterminals.size(), false);
  for (const GrammarRule& r : g.rules) {
    sums[static_cast<size_t>(r.lhs)] += r.weight;
    seen[static_cast<size_t>(r.lhs)] = true;
  }
  std::vector<std::string> out;
  for (size_t i = 0; i < sums.size(); ++i) {
    if (!seen[i]) continue;
    if (std::fabs(sums[i] - 1.0) > tol) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", sums[i]);
      out.push_back(g.nonterminals[i] + " weights sum to " + buf);
    }
  }
  return out;
}

double recursion_weight(double mean) { return 1.0 - 1.0 / (mean + 1.0); }
double stop_weight(double mean) { return 1.0 / (mean + 1.0); }

namespace {

// Builder so the task tables below read close to their rule lists.
struct GrammarBuilder {
  Pcfg g;

  int nt(const std::string& name) { return g.add_nonterminal(name); }

  void rule(int lhs, std::initializer_list<GrammarSym> rhs, double weight) {
    GrammarRule r;
    r.lhs = lhs;
    r.rhs = rhs;
    r.weight = weight;
    for (const GrammarSym& s : r.rhs) {
      if (s.is_terminal) g.add_terminal(s.terminal);
    }
    g.rules.push_back(std::move(r));
  }
};

GrammarSym T(char c) { return GrammarSym::term(c); }
GrammarSym N(int id) { return GrammarSym::nt(id); }

double get_param(const std::map<std::string, double>& params,
                 std::vector<std::string>& unused, const std::string& name,
                 double fallback) {
  auto it = params.find(name);
  if (it == params.end()) return fallback;
  unused.erase(std::remove(unused.begin(), unused.end(), name), unused.end());
  if (!(it->second > 0)) throw std::invalid_argument("parameter " + name + " must be positive");
  return it->second;
}

}  // namespace

std::vector<std::string> task_names() {
  return {"marked-reversal", "unmarked-reversal", "padded-reversal", "dyck", "hardest-cfl"};
}

Pcfg build_task_grammar(const std::string& task, const std::map<std::string, double>& params) {
  std::vector<std::string> unused;
  unused.reserve(params.size());
  for (const auto& kv : params) unused.push_back(kv.first);
  GrammarBuilder b;
  if (task == "marked-reversal" || task == "unmarked-reversal") {
    double mu = get_param(params, unused, "content", 60);
    double f = recursion_weight(mu);
    int S = b.nt("S");
    b.rule(S, {T('0'), N(S), T('0')}, f / 2);
    b.rule(S, {T('1'), N(S), T('1')}, f / 2);
    if (task == "marked-reversal") {
      b.rule(S, {T('#')}, stop_weight(mu));
    } else {
      b.rule(S, {}, stop_weight(mu));
    }
  } else if (task == "padded-reversal") {
    double fc = recursion_weight(get_param(params, unused, "content", 60));
    double mup = get_param(params, unused, "padding", 30);
    double fp = recursion_weight(mup);
    int S = b.nt("S"), T0 = b.nt("T0"), T1 = b.nt("T1");
    b.rule(S, {T('0'), N(S), T('0')}, fc / 2);
    b.rule(S, {T('1'), N(S), T('1')}, fc / 2);
    b.rule(S, {N(T0)}, (1 - fc) / 2);
    b.rule(S, {N(T1)}, (1 - fc) / 2);
    b.rule(T0, {T('0'), N(T0)}, fp);
    b.rule(T0, {}, stop_weight(mup));
    b.rule(T1, {T('1'), N(T1)}, fp);
    b.rule(T1, {}, stop_weight(mup));
  } else if (task == "dyck") {
    double fs = recursion_weight(get_param(params, unused, "splits", 1));
    double fn = recursion_weight(get_param(params, unused, "nesting", 40));
    int S = b.nt("S"), Tn = b.nt("T");
    b.rule(S, {N(S), N(Tn)}, fs);
    b.rule(S, {N(Tn)}, 1 - fs);
    b.rule(Tn, {T('('), N(S), T(')')}, fn / 2);
    b.rule(Tn, {T('['), N(S), T(']')}, fn / 2);
    b.rule(Tn, {T('('), T(')')}, (1 - fn) / 2);
    b.rule(Tn, {T('['), T(']')}, (1 - fn) / 2);
  } else if (task == "hardest-cfl") {
    double fc = recursion_weight(get_param(params, unused, "commas", 0.5));
    double fsf = recursion_weight(get_param(params, unused, "short-filler", 0.5));
    double mulf = get_param(params, unused, "long-filler", 2);
    if (!(mulf > 1)) throw std::invalid_argument("parameter long-filler must exceed 1");
    double flf = recursion_weight(mulf - 1);
    double ps = get_param(params, unused, "semicolon", 0.25);
    if (!(ps < 1)) throw std::invalid_argument("parameter semicolon must be below 1");
    double fs = recursion_weight(get_param(params, unused, "splits", 1.5));
    double fn = recursion_weight(get_param(params, unused, "nesting", 3));
    int Sp = b.nt("S'");
    int L = b.nt("L"), Lp = b.nt("L'"), R = b.nt("R"), Rp = b.nt("R'");
    int U = b.nt("U"), V = b.nt("V"), W = b.nt("W"), Q = b.nt("Q");
    int S = b.nt("S"), Tn = b.nt("T");
    b.rule(Sp, {N(R), T('$'), N(Q), N(S), N(L), T(';')}, 1);
    b.rule(L, {N(Lp), T(','), N(U)}, 1);
    b.rule(Lp, {T(','), N(V), N(Lp)}, fc);
    b.rule(Lp, {}, 1 - fc);
    b.rule(R, {N(U), T(','), N(Rp)}, 1);
    b.rule(Rp, {N(Rp), N(V), T(',')}, fc);
    b.rule(Rp, {}, 1 - fc);
    b.rule(U, {N(W), N(U)}, fsf);
    b.rule(U, {}, 1 - fsf);
    b.rule(V, {N(W), N(V)}, flf);
    b.rule(V, {N(W)}, 1 - flf);
    b.rule(W, {T('(')}, 0.2);
    b.rule(W, {T(')')}, 0.2);
    b.rule(W, {T('[')}, 0.2);
    b.rule(W, {T(']')}, 0.2);
    b.rule(W, {T('$')}, 0.2);
    b.rule(Q, {N(L), T(';'), N(R)}, ps);
    b.rule(Q, {}, 1 - ps);
    b.rule(S, {N(S), N(Q), N(Tn)}, fs);
    b.rule(S, {N(Tn)}, 1 - fs);
    b.rule(Tn, {T('('), N(Q), N(S), N(Q), T(')')}, fn / 2);
    b.rule(Tn, {T('['), N(Q), N(S), N(Q), T(']')}, fn / 2);
    b.rule(Tn, {T('('), N(Q), T(')')}, (1 - fn) / 2);
    b.rule(Tn, {T('['), N(Q), T(']')}, (1 - fn) / 2);
  } else {
    throw std::invalid_argument("unknown task " + task);
  }
  if (!unused.empty()) {
    throw std::invalid_argument("parameter " + unused.front() + " does not apply to " + task);
  }
  validate_pcfg(b.g);
  return b.g;
}

namespace {

// Probability that each nonterminal derives the empty string: least
// fixed point of the rule system, found by monotone iteration.
std::vector<double> empty_string_mass(const Pcfg& g) {
  std::vector<double> e(g.nonterminals.size(), 0);
  for (int round = 0; round < 100000; ++round) {
    double change = 0;
    for (size_t x = 0; x < e.size(); ++x) {
      double total = 0;
      for (const GrammarRule& r : g.rules) {
        if (r.lhs != static_cast<int>(x)) continue;
        double p = r.weight;
        for (const GrammarSym& s : r.rhs) {
          p *= s.is_terminal ? 0.0 : e[static_cast<size_t>(s.nonterminal)];
          if (p == 0) break;
        }
        total += p;
      }
      change = std::max(change, total - e[x]);
      e[x] = total;
    }
    if (change < 1e-16) break;
  }
  return e;
}

using RuleKey = std::pair<int, std::vector<GrammarSym>>;

// Appends a rule, merging weight into an existing identical rule.
void merge_rule(std::vector<GrammarRule>& rules, std::map<RuleKey, size_t>& index,
                int lhs, std::vector<GrammarSym> rhs, double weight) {
  RuleKey key{lhs, rhs};
  auto it = index.find(key);
  if (it != index.end()) {
    rules[it->second].weight += weight;
    return;
  }
  index.emplace(std::move(key), rules.size());
  rules.push_back(GrammarRule{lhs, std::move(rhs), weight});
}

}  // namespace

Pcfg refactor_remove_epsilon_unary(const Pcfg& g, double* empty_mass) {
  validate_pcfg(g);
  size_t n = g.nonterminals.size();
  std::vector<double> e = empty_string_mass(g);
  if (empty_mass) *empty_mass = e[0];

  // Expand every way of erasing a subset of the nullable
  // right-hand-side occurrences; the all-erased variant is the mass
  // already accounted for in e and is dropped.
  Pcfg out;
  out.nonterminals = g.nonterminals;
  out.terminals = g.terminals;
  std::map<RuleKey, size_t> index;
  for (const GrammarRule& r : g.rules) {
    std::vector<size_t> nullable;
    for (size_t i = 0; i < r.rhs.size(); ++i) {
      const GrammarSym& s = r.rhs[i];
      if (!s.is_terminal && e[static_cast<size_t>(s.nonterminal)] > 0) nullable.push_back(i);
    }
    size_t variants = size_t{1} << nullable.size();
    for (size_t mask = 0; mask < variants; ++mask) {
      double w = r.weight;
      std::vector<GrammarSym> rhs;
      size_t k = 0;
      for (size_t i = 0; i < r.rhs.size(); ++i) {
        bool drop = k < nullable.size() && nullable[k] == i && (mask >> k) & 1;
        if (k < nullable.size() && nullable[k] == i) ++k;
        if (drop) {
          w *= e[static_cast<size_t>(r.rhs[i].nonterminal)];
        } else {
          rhs.push_back(r.rhs[i]);
        }
      }
      if (rhs.empty()) continue;
      merge_rule(out.rules, index, r.lhs, std::move(rhs), w);
    }
  }

  // Collapse unary rules by closing their weights: the total weight
  // of all unary chains from a to b is entry (a, b) of the inverse of
  // (identity - unary weights), computed by Gauss-Jordan elimination.
  bool any_unary = false;
  for (const GrammarRule& r : out.rules) {
    if (r.rhs.size() == 1 && !r.rhs[0].is_terminal) any_unary = true;
  }
  if (any_unary) {
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0));
    for (size_t i = 0; i < n; ++i) m[i][i] = 1;
    std::vector<GrammarRule> base;
    for (const GrammarRule& r : out.rules) {
      if (r.rhs.size() == 1 && !r.rhs[0].is_terminal) {
        m[static_cast<size_t>(r.lhs)][static_cast<size_t>(r.rhs[0].nonterminal)] -= r.weight;
      } else {
        base.push_back(r);
      }
    }
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 0));
    for (size_t i = 0; i < n; ++i) c[i][i] = 1;
    for (size_t col = 0; col < n; ++col) {
      double pivot = m[col][col];
      if (!(pivot > 1e-12)) {
        throw std::invalid_argument("unary rule cycle with weight at or above 1");
      }
      for (size_t j = 0; j < n; ++j) {
        m[col][j] /= pivot;
        c[col][j] /= pivot;
      }
      for (size_t row = 0; row < n; ++row) {
        if (row == col) continue;
        double factor = m[row][col];
        if (factor == 0) continue;
        for (size_t j = 0; j < n; ++j) {
          m[row][j] -= factor * m[col][j];
          c[row][j] -= factor * c[col][j];
        }
      }
    }
    out.rules.clear();
    index.clear();
    for (size_t a = 0; a < n; ++a) {
      for (const GrammarRule& r : base) {
        double chain = c[a][static_cast<size_t>(r.lhs)];
        if (chain <= 0) continue;
        double w = chain == 1.0 ? r.weight : chain * r.weight;
        merge_rule(out.rules, index, static_cast<int>(a), r.rhs, w);
      }
    }
  }

  // A start symbol that cannot derive any terminal string means all
  // of the grammar's mass was on the empty string (or the grammar was
  // degenerate to begin with).
  std::vector<bool> productive(n, false);
  for (bool grew = true; grew;) {
    grew = false;
    for (const GrammarRule& r : out.rules) {
      if (productive[static_cast<size_t>(r.lhs)]) continue;
      bool ok = true;
      for (const GrammarSym& s : r.rhs) {
        if (!s.is_terminal && !productive[static_cast<size_t>(s.nonterminal)]) ok = false;
      }
      if (ok) {
        productive[static_cast<size_t>(r.lhs)] = true;
        grew = true;
      }
    }
  }
  if (!productive[0]) {
    throw std::invalid_argument("grammar generates no non-empty string");
  }
  return out;
}

namespace {

constexpr double kUnset = -1;

// Inside weights over a span of w, memoized per nonterminal and per
// rule suffix.  Epsilon-freeness and unary-freeness make every
// recursive call strictly shrink its span, so plain recursion
// terminates.
struct InsideDp {
  const Pcfg& g;
  const std::string& w;
  int n;
  int width;                      // spans indexed i * (n + 1) + j
  std::vector<double> nt_memo;    // [nonterminal][span]
  std::vector<int> suffix_base;   // rule index -> slot of its pos-0 suffix
  std::vector<double> seq_memo;   // [suffix slot][span]

  InsideDp(const Pcfg& grammar, const std::string& str)
      : g(grammar), w(str), n(static_cast<int>(str.size())), width((n + 1) * (n + 1)) {
    nt_memo.assign(g.nonterminals.size() * static_cast<size_t>(width), kUnset);
    int slots = 0;
    for (const GrammarRule& r : g.rules) {
      suffix_base.push_back(slots);
      slots += static_cast<int>(r.rhs.size()) + 1;
    }
    seq_memo.assign(static_cast<size_t>(slots) * static_cast<size_t>(width), kUnset);
  }

  double nonterminal(int x, int i, int j) {
    double& slot = nt_memo[static_cast<size_t>(x) * width + i * (n + 1) + j];
    if (slot != kUnset) return slot;
    double total = 0;
    for (size_t r = 0; r < g.rules.size(); ++r) {
      if (g.rules[r].lhs != x) continue;
      total += g.rules[r].weight * seq(static_cast<int>(r), 0, i, j);
    }
    slot = total;
    return total;
  }

  // Weight of rule r's suffix starting at pos deriving w[i, j).
  double seq(int r, int pos, int i, int j) {
    const std::vector<GrammarSym>& rhs = g.rules[static_cast<size_t>(r)].rhs;
    int remaining = static_cast<int>(rhs.size()) - pos;
    if (remaining == 0) return i == j ? 1.0 : 0.0;
    if (j - i < remaining) return 0;  // every symbol spans at least 1
    double& slot =
        seq_memo[static_cast<size_t>(suffix_base[static_cast<size_t>(r)] + pos) * width +
                 i * (n + 1) + j];
    if (slot != kUnset) return slot;
    double total = 0;
    const GrammarSym& s = rhs[static_cast<size_t>(pos)];
    if (s.is_terminal) {
      if (w[static_cast<size_t>(i)] == s.terminal) total = seq(r, pos + 1, i + 1, j);
    } else {
      for (int k = i + 1; k <= j - (remaining - 1); ++k) {
        double left = nonterminal(s.nonterminal, i, k);
        if (left != 0) total += left * seq(r, pos + 1, k, j);
      }
    }
    slot = total;
    return total;
  }
};

}  // namespace

double inside(const Pcfg& g, const std::string& w) {
  if (g.has_epsilon_rules() || g.has_unary_rules()) {
    throw std::invalid_argument("inside weights need an epsilon-free, unary-free grammar");
  }
  if (w.empty()) return 0;
  InsideDp dp(g, w);
  return dp.nonterminal(0, 0, dp.n);
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> toks;
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

}  // namespace

Pcfg parse_pcfg(const std::string& text) {
  std::vector<std::vector<std::string>> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() < 4 || toks[1] != "->" || toks[toks.size() - 2] != "/") {
      throw std::invalid_argument("bad grammar rule: " + line);
    }
    lines.push_back(std::move(toks));
  }
  if (lines.empty()) throw std::invalid_argument("grammar text has no rules");
  Pcfg g;
  for (const auto& toks : lines) g.add_nonterminal(toks[0]);
  for (const auto& toks : lines) {
    GrammarRule r;
    r.lhs = g.find_nonterminal(toks[0]);
    for (size_t i = 2; i + 2 < toks.size(); ++i) {
      int nt = g.find_nonterminal(toks[i]);
      if (nt >= 0) {
        r.rhs.push_back(GrammarSym::nt(nt));
      } else if (toks[i].size() == 1) {
        g.add_terminal(toks[i][0]);
        r.rhs.push_back(GrammarSym::term(toks[i][0]));
      } else {
        throw std::invalid_argument("symbol " + toks[i] + " never appears as a left-hand side");
      }
    }
    try {
      size_t used = 0;
      r.weight = std::stod(toks.back(), &used);
      if (used != toks.back().size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad rule weight " + toks.back());
    }
    g.rules.push_back(std::move(r));
  }
  validate_pcfg(g);
  return g;
}

std::string format_pcfg(const Pcfg& g) {
  std::string out;
  char buf[64];
  for (const GrammarRule& r : g.rules) {
    out += g.nonterminals[static_cast<size_t>(r.lhs)];
    out += " ->";
    for (const GrammarSym& s : r.rhs) {
      out += ' ';
      if (s.is_terminal) {
        out += s.terminal;
      } else {
        out += g.nonterminals[static_cast<size_t>(s.nonterminal)];
      }
    }
    std::snprintf(buf, sizeof(buf), " / %.17g\n", r.weight);
    out += buf;
  }
  return out;
}

Pcfg load_pcfg_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grammar file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_pcfg(buf.str());
}

void save_pcfg_file(const Pcfg& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write grammar file " + path);
  out << format_pcfg(g);
}

}  // namespace nsrnn
