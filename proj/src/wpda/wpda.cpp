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

#include "nsrnn/wpda/wpda.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace nsrnn {

int WeightedPda::input_index(char c) const {
  auto pos = alphabet.find(c);
  return pos == std::string::npos ? -1 : static_cast<int>(pos);
}

void WeightedPda::validate() const {
  if (state_names.empty()) throw std::invalid_argument("pda: no states");
  if (stack_names.empty()) throw std::invalid_argument("pda: no stack symbols");
  for (const Transition& t : transitions) {
    if (t.state < 0 || t.state >= num_states() || t.next_state < 0 ||
        t.next_state >= num_states()) {
      throw std::invalid_argument("pda: state out of range");
    }
    if (t.input < 0 || t.input >= num_inputs()) {
      throw std::invalid_argument("pda: input symbol out of range");
    }
    if (t.top < 0 || t.top >= num_stack_symbols()) {
      throw std::invalid_argument("pda: stack symbol out of range");
    }
    if (t.action.kind == ActionKind::Pop) {
      if (t.action.symbol != -1) throw std::invalid_argument("pda: pop carries a symbol");
    } else {
      if (t.action.symbol < 0 || t.action.symbol >= num_stack_symbols()) {
        throw std::invalid_argument("pda: pushed symbol out of range");
      }
    }
    if (!(t.weight >= 0) || !std::isfinite(t.weight)) {
      throw std::invalid_argument("pda: weight must be finite and nonnegative");
    }
  }
}

int WeightedPda::group_key(int state, int input, int top) const {
  return (state * num_inputs() + input) * num_stack_symbols() + top;
}

void WeightedPda::finalize() {
  validate();
  by_config_.clear();
  for (size_t i = 0; i < transitions.size(); ++i) {
    const Transition& t = transitions[i];
    by_config_[group_key(t.state, t.input, t.top)].push_back(static_cast<int>(i));
  }
  finalized_ = true;
}

const std::vector<int>& WeightedPda::group(int state, int input, int top) const {
  if (!finalized_) throw std::logic_error("pda: group() before finalize()");
  auto it = by_config_.find(group_key(state, input, top));
  return it == by_config_.end() ? empty_group_ : it->second;
}

ProbabilisticReport validate_probabilistic(const WeightedPda& pda, real_t tol) {
  std::map<std::tuple<int, int, int>, real_t> sums;
  for (const Transition& t : pda.transitions) {
    sums[{t.state, t.input, t.top}] += t.weight;
  }
  ProbabilisticReport report;
  for (const auto& [key, sum] : sums) {
    if (std::fabs(sum - real_t(1)) > tol) {
      report.ok = false;
      report.violations.push_back(
          {std::get<0>(key), std::get<1>(key), std::get<2>(key), sum});
    }
  }
  return report;
}

WeightedPda normalize_groups(const WeightedPda& pda) {
  std::map<std::tuple<int, int, int>, real_t> sums;
  for (const Transition& t : pda.transitions) {
    sums[{t.state, t.input, t.top}] += t.weight;
  }
  WeightedPda out;
  out.state_names = pda.state_names;
  out.alphabet = pda.alphabet;
  out.stack_names = pda.stack_names;
  out.transitions = pda.transitions;
  for (Transition& t : out.transitions) {
    real_t sum = sums[{t.state, t.input, t.top}];
    if (sum > 0) t.weight /= sum;
  }
  out.finalize();
  return out;
}

namespace {

std::vector<int> input_indices(const WeightedPda& pda, const std::string& w) {
  std::vector<int> idx;
  idx.reserve(w.size());
  for (char c : w) {
    int i = pda.input_index(c);
    if (i < 0) {
      throw std::invalid_argument(std::string("pda: input symbol '") + c +
                                  "' not in alphabet");
    }
    idx.push_back(i);
  }
  return idx;
}

struct RunDfs {
  const WeightedPda& pda;
  const std::vector<int>& inputs;
  int64_t cap;
  int64_t runs = 0;
  RunEnumeration out;
  std::vector<Configuration> path;
  std::vector<int> stack;

  void bump() {
    if (++runs > cap) throw std::runtime_error("enumerate_runs: run cap exceeded");
  }

  void go(int pos, int state, real_t weight) {
    path.push_back({pos, state, stack});
    if (pos == static_cast<int>(inputs.size())) {
      bump();
      out.complete.push_back({path, weight});
      path.pop_back();
      return;
    }
    const auto& g = pda.group(state, inputs[static_cast<size_t>(pos)], stack.back());
    if (g.empty()) {
      bump();
      out.terminated_weight += weight;
      path.pop_back();
      return;
    }
    for (int ti : g) {
      const Transition& t = pda.transitions[static_cast<size_t>(ti)];
      switch (t.action.kind) {
        case ActionKind::Push:
          stack.push_back(t.action.symbol);
          go(pos + 1, t.next_state, weight * t.weight);
          stack.pop_back();
          break;
        case ActionKind::Replace: {
          int old = stack.back();
          stack.back() = t.action.symbol;
          go(pos + 1, t.next_state, weight * t.weight);
          stack.back() = old;
          break;
        }
        case ActionKind::Pop:
          if (stack.size() == 1) {
            // Popping the bottom marker ends the run here, whatever
            // input remains.
            bump();
            out.terminated_weight += weight * t.weight;
          } else {
            int old = stack.back();
            stack.pop_back();
            go(pos + 1, t.next_state, weight * t.weight);
            stack.push_back(old);
          }
          break;
      }
    }
    path.pop_back();
  }
};

struct OracleDfs {
  const WeightedPda& pda;
  const std::vector<int>& inputs;
  OracleWeights& out;
  int64_t cap;
  int64_t nodes = 0;

  std::vector<int> stack;

  void go(int pos, int state, real_t weight) {
    if (++nodes > cap) {
      throw std::runtime_error("oracle_config_weights: node cap exceeded");
    }
    out.at(pos, state, stack.back()) += weight;
    if (pos == static_cast<int>(inputs.size())) return;
    for (int ti : pda.group(state, inputs[static_cast<size_t>(pos)], stack.back())) {
      const Transition& t = pda.transitions[static_cast<size_t>(ti)];
      switch (t.action.kind) {
        case ActionKind::Push:
          stack.push_back(t.action.symbol);
          go(pos + 1, t.next_state, weight * t.weight);
          stack.pop_back();
          break;
        case ActionKind::Replace: {
          int old = stack.back();
          stack.back() = t.action.symbol;
          go(pos + 1, t.next_state, weight * t.weight);
          stack.back() = old;
          break;
        }
        case ActionKind::Pop:
          if (stack.size() > 1) {
            int old = stack.back();
            stack.pop_back();
            go(pos + 1, t.next_state, weight * t.weight);
            stack.push_back(old);
          }
          break;
      }
    }
  }
};

}  // namespace

RunEnumeration enumerate_runs(const WeightedPda& pda, const std::string& w, int64_t cap) {
  std::vector<int> inputs = input_indices(pda, w);
  RunDfs dfs{pda, inputs, cap, 0, {}, {}, {}};
  dfs.stack.push_back(0);
  dfs.go(0, 0, 1);
  return std::move(dfs.out);
}

OracleWeights oracle_config_weights(const WeightedPda& pda, const std::string& w,
                                    int64_t cap) {
  std::vector<int> inputs = input_indices(pda, w);
  OracleWeights out(static_cast<int>(w.size()) + 1, pda.num_states(),
                    pda.num_stack_symbols());
  OracleDfs dfs{pda, inputs, out, cap, 0, {}};
  dfs.stack.push_back(0);
  dfs.go(0, 0, 1);
  return out;
}

WeightedPda example_pda() {
  WeightedPda pda;
  pda.state_names = {"q1", "q2"};
  pda.alphabet = "01";
  pda.stack_names = {"_", "0", "1"};
  for (int a = 0; a < 2; ++a) {
    for (int x = 0; x < 3; ++x) {
      pda.transitions.push_back({0, a, x, 0, {ActionKind::Push, a + 1}, 1});
    }
  }
  for (int a = 0; a < 2; ++a) {
    pda.transitions.push_back({0, a, a + 1, 1, {ActionKind::Pop, -1}, 1});
    pda.transitions.push_back({1, a, a + 1, 1, {ActionKind::Pop, -1}, 1});
  }
  pda.finalize();
  return pda;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream in(line);
  std::string t;
  while (in >> t) toks.push_back(t);
  return toks;
}

[[noreturn]] void parse_fail(int lineno, const std::string& msg) {
  throw std::invalid_argument("pda line " + std::to_string(lineno) + ": " + msg);
}

}  // namespace

WeightedPda parse_pda(const std::string& text) {
  WeightedPda pda;
  std::map<std::string, int> state_ids;
  std::map<std::string, int> stack_ids;
  bool have_states = false, have_input = false, have_stack = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::vector<std::string> toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks[0] == "states:") {
      if (have_states) parse_fail(lineno, "duplicate states header");
      for (size_t i = 1; i < toks.size(); ++i) {
        if (!state_ids.emplace(toks[i], static_cast<int>(i) - 1).second) {
          parse_fail(lineno, "duplicate state name " + toks[i]);
        }
        pda.state_names.push_back(toks[i]);
      }
      have_states = true;
      continue;
    }
    if (toks[0] == "input:") {
      if (have_input) parse_fail(lineno, "duplicate input header");
      for (size_t i = 1; i < toks.size(); ++i) {
        if (toks[i].size() != 1) parse_fail(lineno, "input symbols must be single characters");
        if (pda.alphabet.find(toks[i][0]) != std::string::npos) {
          parse_fail(lineno, "duplicate input symbol " + toks[i]);
        }
        pda.alphabet.push_back(toks[i][0]);
      }
      have_input = true;
      continue;
    }
    if (toks[0] == "stack:") {
      if (have_stack) parse_fail(lineno, "duplicate stack header");
      for (size_t i = 1; i < toks.size(); ++i) {
        if (!stack_ids.emplace(toks[i], static_cast<int>(i) - 1).second) {
          parse_fail(lineno, "duplicate stack symbol " + toks[i]);
        }
        pda.stack_names.push_back(toks[i]);
      }
      have_stack = true;
      continue;
    }
    if (!have_states || !have_input || !have_stack) {
      parse_fail(lineno, "transition before states:/input:/stack: headers");
    }
    // q a x -> r push|replace y w   or   q a x -> r pop w
    if (toks.size() < 6 || toks[3] != "->") parse_fail(lineno, "malformed transition");
    Transition t;
    auto qit = state_ids.find(toks[0]);
    if (qit == state_ids.end()) parse_fail(lineno, "unknown state " + toks[0]);
    t.state = qit->second;
    if (toks[1].size() != 1 || pda.input_index(toks[1][0]) < 0) {
      parse_fail(lineno, "unknown input symbol " + toks[1]);
    }
    t.input = pda.input_index(toks[1][0]);
    auto xit = stack_ids.find(toks[2]);
    if (xit == stack_ids.end()) parse_fail(lineno, "unknown stack symbol " + toks[2]);
    t.top = xit->second;
    auto rit = state_ids.find(toks[4]);
    if (rit == state_ids.end()) parse_fail(lineno, "unknown state " + toks[4]);
    t.next_state = rit->second;
    size_t wpos;
    if (toks[5] == "push" || toks[5] == "replace") {
      if (toks.size() != 8) parse_fail(lineno, "malformed transition");
      auto yit = stack_ids.find(toks[6]);
      if (yit == stack_ids.end()) parse_fail(lineno, "unknown stack symbol " + toks[6]);
      t.action = {toks[5] == "push" ? ActionKind::Push : ActionKind::Replace, yit->second};
      wpos = 7;
    } else if (toks[5] == "pop") {
      if (toks.size() != 7) parse_fail(lineno, "malformed transition");
      t.action = {ActionKind::Pop, -1};
      wpos = 6;
    } else {
      parse_fail(lineno, "unknown action " + toks[5]);
    }
    try {
      t.weight = static_cast<real_t>(std::stod(toks[wpos]));
    } catch (const std::exception&) {
      parse_fail(lineno, "bad weight " + toks[wpos]);
    }
    pda.transitions.push_back(t);
  }
  if (!have_states || !have_input || !have_stack) {
    throw std::invalid_argument("pda: missing states:/input:/stack: headers");
  }
  pda.finalize();
  return pda;
}

std::string format_pda(const WeightedPda& pda) {
  std::ostringstream out;
  out << "states:";
  for (const std::string& s : pda.state_names) out << ' ' << s;
  out << "\ninput:";
  for (char c : pda.alphabet) out << ' ' << c;
  out << "\nstack:";
  for (const std::string& s : pda.stack_names) out << ' ' << s;
  out << '\n';
  char buf[64];
  for (const Transition& t : pda.transitions) {
    out << pda.state_names[static_cast<size_t>(t.state)] << ' '
        << pda.alphabet[static_cast<size_t>(t.input)] << ' '
        << pda.stack_names[static_cast<size_t>(t.top)] << " -> "
        << pda.state_names[static_cast<size_t>(t.next_state)] << ' ';
    switch (t.action.kind) {
      case ActionKind::Push:
        out << "push " << pda.stack_names[static_cast<size_t>(t.action.symbol)];
        break;
      case ActionKind::Replace:
        out << "replace " << pda.stack_names[static_cast<size_t>(t.action.symbol)];
        break;
      case ActionKind::Pop:
        out << "pop";
        break;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(t.weight));
    out << ' ' << buf << '\n';
  }
  return out.str();
}

WeightedPda load_pda_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open PDA file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pda(buf.str());
}

}  // namespace nsrnn
