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

#include "nsrnn/hardest_cfl/hardest_cfl.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nsrnn/ns_stack/ns_stack.hpp"

namespace nsrnn {

void GnfGrammar::validate() const {
  if (nonterminals.empty()) throw std::invalid_argument("GNF grammar has no nonterminals");
  int n = static_cast<int>(nonterminals.size());
  for (const GnfRule& r : rules) {
    if (r.lhs < 0 || r.lhs >= n) throw std::invalid_argument("GNF rule lhs out of range");
    if (r.terminal == 0) throw std::invalid_argument("GNF rule must start with a terminal");
    for (int nt : r.rhs) {
      if (nt < 0 || nt >= n) throw std::invalid_argument("GNF rule references unknown nonterminal");
      if (nt == 0) {
        throw std::invalid_argument("start symbol may not appear on a right-hand side");
      }
    }
  }
}

std::string push_code(int nonterminal1) {
  return "(" + std::string(static_cast<size_t>(nonterminal1), '[') + "(";
}

std::string pop_code(int nonterminal1) {
  if (nonterminal1 == 1) return "$";
  return ")" + std::string(static_cast<size_t>(nonterminal1), ']') + ")";
}

Homomorphism build_homomorphism(const GnfGrammar& g) {
  g.validate();
  Homomorphism h;
  for (const GnfRule& r : g.rules) {
    std::string code = pop_code(r.lhs + 1);
    for (int nt : r.rhs) code += push_code(nt + 1);
    h.images[r.terminal] += "," + code;
  }
  for (auto& kv : h.images) kv.second += ",;";
  return h;
}

std::string apply_homomorphism(const Homomorphism& h, const std::string& w) {
  std::string out;
  for (char c : w) {
    auto it = h.images.find(c);
    if (it == h.images.end()) {
      throw std::invalid_argument(std::string("no image for symbol ") + c);
    }
    out += it->second;
  }
  return out;
}

WeightedPda l0_pda() {
  WeightedPda pda;
  pda.state_names = {"seam", "x", "y", "z"};
  pda.alphabet = "()[]$,;";
  pda.stack_names = {"_", "$", "(", "["};
  const int seam = 0, x = 1, y = 2, z = 3;
  const int bottom = 0, dollar = 1, paren = 2, bracket = 3;
  auto add = [&pda](int q, char c, int top, int r, StackAction a) {
    pda.transitions.push_back({q, pda.input_index(c), top, r, a, 1});
  };
  StackAction keep[] = {{ActionKind::Replace, bottom},
                        {ActionKind::Replace, dollar},
                        {ActionKind::Replace, paren},
                        {ActionKind::Replace, bracket}};
  for (int top = 0; top < 4; ++top) {
    // Decoy segments absorb anything but the block terminator.
    for (char c : std::string("()[]$,")) {
      add(seam, c, top, x, keep[top]);
      add(x, c, top, x, keep[top]);
      add(z, c, top, z, keep[top]);
    }
    // A comma may instead open the genuine segment, or close it.
    add(seam, ',', top, y, keep[top]);
    add(x, ',', top, y, keep[top]);
    add(y, ',', top, z, keep[top]);
    add(z, ';', top, seam, keep[top]);
  }
  // Genuine segments: "$" first, then bracket matching above it.
  add(y, '$', bottom, y, {ActionKind::Push, dollar});
  for (int top : {dollar, paren, bracket}) {
    add(y, '(', top, y, {ActionKind::Push, paren});
    add(y, '[', top, y, {ActionKind::Push, bracket});
  }
  add(y, ')', paren, y, {ActionKind::Pop, -1});
  add(y, ']', bracket, y, {ActionKind::Pop, -1});
  pda.validate();
  pda.finalize();
  return pda;
}

bool l0_membership(const std::string& s, int block) {
  if (s.empty()) return false;
  static const WeightedPda pda = l0_pda();
  for (char c : s) {
    if (pda.input_index(c) < 0) return false;
  }
  std::vector<TensorValue> deltas = pack_transitions(pda, s, Semiring::Real);
  NondeterministicStack stack({1, pda.num_states(), pda.num_stack_symbols()}, Semiring::Real,
                              block);
  try {
    for (TensorValue& d : deltas) stack.step(constant(with_batch_axis(std::move(d))));
  } catch (const DeadStackError&) {
    return false;
  }
  // Accept between blocks with every bracket closed: top of stack is
  // the seen-"$" marker.
  const TensorValue& fwd = stack.forward_weights(stack.layers()).value();
  return fwd.at({0, 0, 1}) > 0;
}

GnfGrammar toy_gnf_grammar() {
  GnfGrammar g;
  g.nonterminals = {"S", "A"};
  g.rules = {{0, 'a', {1, 1}}, {0, 'b', {}}, {1, 'a', {1}}, {1, 'b', {}}};
  g.validate();
  return g;
}

namespace {

struct GnfDerives {
  const GnfGrammar& g;
  const std::string& w;
  int n;
  std::vector<signed char> memo;  // -1 unknown, 0 no, 1 yes

  GnfDerives(const GnfGrammar& grammar, const std::string& str)
      : g(grammar), w(str), n(static_cast<int>(str.size())) {
    memo.assign(g.nonterminals.size() * static_cast<size_t>((n + 1) * (n + 1)), -1);
  }

  bool nonterminal(int a, int i, int j) {
    signed char& slot =
        memo[static_cast<size_t>(a) * (n + 1) * (n + 1) + static_cast<size_t>(i) * (n + 1) + j];
    if (slot >= 0) return slot != 0;
    bool ok = false;
    for (const GnfRule& r : g.rules) {
      if (r.lhs != a || i >= j || w[static_cast<size_t>(i)] != r.terminal) continue;
      if (split(r.rhs, 0, i + 1, j)) {
        ok = true;
        break;
      }
    }
    slot = ok ? 1 : 0;
    return ok;
  }

  bool split(const std::vector<int>& rhs, size_t pos, int i, int j) {
    if (pos == rhs.size()) return i == j;
    if (j - i < static_cast<int>(rhs.size() - pos)) return false;
    for (int k = i + 1; k <= j; ++k) {
      if (nonterminal(rhs[pos], i, k) && split(rhs, pos + 1, k, j)) return true;
    }
    return false;
  }
};

}  // namespace

bool gnf_derives(const GnfGrammar& g, const std::string& w) {
  if (w.empty()) return false;  // GNF rules always emit a terminal
  GnfDerives dp(g, w);
  return dp.nonterminal(0, 0, dp.n);
}

GnfGrammar parse_gnf(const std::string& text) {
  std::vector<std::vector<std::string>> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (toks.empty()) continue;
    if (toks.size() < 3 || toks[1] != "->" || toks[2].size() != 1) {
      throw std::invalid_argument("bad GNF rule: " + line);
    }
    lines.push_back(std::move(toks));
  }
  if (lines.empty()) throw std::invalid_argument("GNF grammar text has no rules");
  GnfGrammar g;
  auto nt_id = [&g](const std::string& name) {
    for (size_t i = 0; i < g.nonterminals.size(); ++i) {
      if (g.nonterminals[i] == name) return static_cast<int>(i);
    }
    g.nonterminals.push_back(name);
    return static_cast<int>(g.nonterminals.size()) - 1;
  };
  for (const auto& toks : lines) nt_id(toks[0]);
  for (const auto& toks : lines) {
    GnfRule r;
    r.lhs = nt_id(toks[0]);
    r.terminal = toks[2][0];
    for (size_t i = 3; i < toks.size(); ++i) {
      int id = -1;
      for (size_t k = 0; k < g.nonterminals.size(); ++k) {
        if (g.nonterminals[k] == toks[i]) id = static_cast<int>(k);
      }
      if (id < 0) {
        throw std::invalid_argument("symbol " + toks[i] + " never appears as a left-hand side");
      }
      r.rhs.push_back(id);
    }
    g.rules.push_back(std::move(r));
  }
  g.validate();
  return g;
}

GnfGrammar load_gnf_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grammar file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_gnf(buf.str());
}

}  // namespace nsrnn
