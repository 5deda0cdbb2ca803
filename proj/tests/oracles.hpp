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

// Independent reference implementations the tests check against:
// brute-force run enumeration lives in the wpda module itself; here we
// add random PDA generation, exhaustive derivation enumeration for
// grammars, and a central finite-difference gradient checker.

#ifndef NSRNN_TESTS_ORACLES_HPP_
#define NSRNN_TESTS_ORACLES_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsrnn/controllers/models.hpp"
#include "nsrnn/grammars/pcfg.hpp"
#include "nsrnn/harness/evaluate.hpp"
#include "nsrnn/tensor/ops.hpp"
#include "nsrnn/tensor/rng.hpp"
#include "nsrnn/wpda/wpda.hpp"

namespace nsrnn::testing {

// Random probabilistic PDA with 1..2 states, 1..2 stack symbols above
// the bottom marker, and a 1..2 symbol input alphabet.  Each
// (state, input, top) group is either empty (a dead end) or holds one
// or two transitions normalized to sum to 1.  Pushes and replacements
// never write the bottom marker; pops may fire on any top, including
// the bottom marker, where they end the run.
inline WeightedPda random_probabilistic_pda(Rng& rng) {
  WeightedPda pda;
  int states = 1 + static_cast<int>(rng.uniform_int(2));
  int symbols = 1 + static_cast<int>(rng.uniform_int(2));
  int letters = 1 + static_cast<int>(rng.uniform_int(2));
  for (int q = 0; q < states; ++q) pda.state_names.push_back("q" + std::to_string(q + 1));
  pda.alphabet = std::string("01").substr(0, static_cast<size_t>(letters));
  pda.stack_names.push_back("_");
  for (int x = 0; x < symbols; ++x) pda.stack_names.push_back(std::string(1, '0' + x));
  for (int q = 0; q < states; ++q) {
    for (int a = 0; a < letters; ++a) {
      for (int x = 0; x <= symbols; ++x) {
        int count = static_cast<int>(rng.uniform_int(3));  // 0..2
        for (int k = 0; k < count; ++k) {
          Transition t;
          t.state = q;
          t.input = a;
          t.top = x;
          t.next_state = static_cast<int>(rng.uniform_int(states));
          switch (rng.uniform_int(3)) {
            case 0:
              t.action = {ActionKind::Push, 1 + static_cast<int>(rng.uniform_int(symbols))};
              break;
            case 1:
              t.action = {ActionKind::Replace, 1 + static_cast<int>(rng.uniform_int(symbols))};
              break;
            default:
              t.action = {ActionKind::Pop, -1};
              break;
          }
          t.weight = rng.uniform(real_t(0.1), real_t(1));
          pda.transitions.push_back(t);
        }
      }
    }
  }
  pda = normalize_groups(pda);
  pda.finalize();
  return pda;
}

inline std::string random_input(const WeightedPda& pda, int max_len, Rng& rng) {
  int len = static_cast<int>(rng.uniform_int(max_len + 1));
  std::string w;
  for (int i = 0; i < len; ++i) {
    w += pda.alphabet[static_cast<size_t>(rng.uniform_int(
        static_cast<int64_t>(pda.alphabet.size())))];
  }
  return w;
}

// Total weight of every string of length <= max_len, by exhaustive
// leftmost derivation.  Works on the raw grammar, empty-string and
// single-symbol rules included, so it is independent of the grammar
// refactoring the table sampler needs.  Pruned by the shortest string
// each nonterminal can derive; capped to fail loudly on runaway
// grammars.
inline std::map<std::string, double> enumerate_language(const Pcfg& g, int max_len,
                                                        int64_t cap = 50000000) {
  size_t n = g.nonterminals.size();
  const int64_t inf = 1 << 29;
  std::vector<int64_t> min_len(n, inf);
  for (bool changed = true; changed;) {
    changed = false;
    for (const GrammarRule& r : g.rules) {
      if (r.weight == 0) continue;
      int64_t total = 0;
      for (const GrammarSym& s : r.rhs) {
        total += s.is_terminal ? 1 : min_len[static_cast<size_t>(s.nonterminal)];
        if (total >= inf) {
          total = inf;
          break;
        }
      }
      if (total < min_len[static_cast<size_t>(r.lhs)]) {
        min_len[static_cast<size_t>(r.lhs)] = total;
        changed = true;
      }
    }
  }

  std::vector<std::vector<const GrammarRule*>> by_lhs(n);
  for (const GrammarRule& r : g.rules) {
    if (r.weight > 0) by_lhs[static_cast<size_t>(r.lhs)].push_back(&r);
  }

  std::map<std::string, double> language;
  int64_t visited = 0;
  // suffix holds the pending sentential form, front first.
  std::function<void(std::string&, std::vector<GrammarSym>&, size_t, double, int)> go =
      [&](std::string& prefix, std::vector<GrammarSym>& suffix, size_t at, double weight,
          int depth) {
        if (++visited > cap) throw std::runtime_error("enumerate_language: derivation cap");
        if (depth > 100000) throw std::runtime_error("enumerate_language: depth cap");
        size_t flushed = 0;
        while (at < suffix.size() && suffix[at].is_terminal) {
          prefix += suffix[at].terminal;
          ++at;
          ++flushed;
        }
        int64_t lower = static_cast<int64_t>(prefix.size());
        for (size_t i = at; i < suffix.size() && lower <= max_len; ++i) {
          lower += suffix[i].is_terminal
                       ? 1
                       : min_len[static_cast<size_t>(suffix[i].nonterminal)];
        }
        if (lower <= max_len) {
          if (at == suffix.size()) {
            language[prefix] += weight;
          } else {
            int head = suffix[at].nonterminal;
            for (const GrammarRule* r : by_lhs[static_cast<size_t>(head)]) {
              std::vector<GrammarSym> next(suffix.begin() + static_cast<int64_t>(at) + 1,
                                           suffix.end());
              next.insert(next.begin(), r->rhs.begin(), r->rhs.end());
              go(prefix, next, 0, weight * r->weight, depth + 1);
            }
          }
        }
        prefix.resize(prefix.size() - flushed);
      };
  std::string prefix;
  std::vector<GrammarSym> start{GrammarSym::nt(0)};
  go(prefix, start, 0, 1.0, 0);
  return language;
}

inline double weight_of_length(const std::map<std::string, double>& language, size_t len) {
  double total = 0;
  for (const auto& kv : language) {
    if (kv.first.size() == len) total += kv.second;
  }
  return total;
}

// Central finite-difference gradient check.  `build` reconstructs the
// scalar loss from the given leaves; the analytic pass tracks them on a
// tape, then every coordinate is wiggled by +-step.  A coordinate
// counts against the report when the relative error exceeds `tol`;
// coordinates where both gradients sit below `floor` are treated as
// tied zeros.  The floor reflects the method's resolution: central
// differences at step 1e-6 on a unit-scale double loss carry about
// 5e-10 of absolute noise, so relative comparison below about 1e-5 of
// gradient magnitude measures that noise rather than correctness.
struct GradReport {
  int64_t coords = 0;
  int64_t over_tol = 0;
  double worst = 0;

  double bad_fraction() const {
    return coords == 0 ? 0 : static_cast<double>(over_tol) / static_cast<double>(coords);
  }
};

inline double gradient_rel_error(double analytic, double numeric, double floor) {
  double scale = std::max(std::fabs(analytic), std::fabs(numeric));
  if (scale < floor) return 0;
  return std::fabs(analytic - numeric) / scale;
}

inline GradReport check_input_gradients(
    std::vector<TensorValue> leaves,
    const std::function<Tensor(const std::vector<Tensor>&)>& build, real_t step = real_t(1e-6),
    double tol = 1e-4, double floor = 1e-5) {
  Tape tape;
  std::vector<Tensor> tracked;
  tracked.reserve(leaves.size());
  for (const TensorValue& v : leaves) tracked.push_back(tape.input(v));
  Tensor loss = build(tracked);
  tape.backward(loss);

  auto run = [&]() {
    std::vector<Tensor> frozen;
    frozen.reserve(leaves.size());
    for (const TensorValue& v : leaves) frozen.push_back(constant(v));
    return static_cast<double>(build(frozen).scalar());
  };

  GradReport report;
  for (size_t li = 0; li < leaves.size(); ++li) {
    const TensorValue* grad = tape.grad(tracked[li]);
    for (int64_t c = 0; c < leaves[li].numel(); ++c) {
      real_t saved = leaves[li].data[static_cast<size_t>(c)];
      leaves[li].data[static_cast<size_t>(c)] = saved + step;
      double up = run();
      leaves[li].data[static_cast<size_t>(c)] = saved - step;
      double down = run();
      leaves[li].data[static_cast<size_t>(c)] = saved;
      double numeric = (up - down) / (2.0 * static_cast<double>(step));
      double analytic = grad ? static_cast<double>(grad->data[static_cast<size_t>(c)]) : 0.0;
      double rel = gradient_rel_error(analytic, numeric, floor);
      ++report.coords;
      if (rel > tol) ++report.over_tol;
      if (rel > report.worst) report.worst = rel;
    }
  }
  return report;
}

// Same check over a model's parameters, with the loss fixed to the
// summed next-symbol negative log-likelihood of one string.
inline GradReport check_model_gradients(Model& model, const std::string& w,
                                        real_t step = real_t(1e-6), double tol = 1e-4,
                                        double floor = 1e-5) {
  Tape tape;
  std::vector<Tensor> bound = model.bind(&tape);
  Tensor loss = sum_all(batch_nll(model, bound, {&w}));
  tape.backward(loss);

  GradReport report;
  for (size_t pi = 0; pi < model.params().size(); ++pi) {
    Parameter& p = model.params().param(static_cast<int>(pi));
    const TensorValue* grad = tape.grad(bound[pi]);
    for (int64_t c = 0; c < p.value.numel(); ++c) {
      real_t saved = p.value.data[static_cast<size_t>(c)];
      p.value.data[static_cast<size_t>(c)] = saved + step;
      std::vector<Tensor> frozen = model.bind(nullptr);
      double up = static_cast<double>(sum_all(batch_nll(model, frozen, {&w})).scalar());
      p.value.data[static_cast<size_t>(c)] = saved - step;
      frozen = model.bind(nullptr);
      double down = static_cast<double>(sum_all(batch_nll(model, frozen, {&w})).scalar());
      p.value.data[static_cast<size_t>(c)] = saved;
      double numeric = (up - down) / (2.0 * static_cast<double>(step));
      double analytic = grad ? static_cast<double>(grad->data[static_cast<size_t>(c)]) : 0.0;
      double rel = gradient_rel_error(analytic, numeric, floor);
      ++report.coords;
      if (rel > tol) ++report.over_tol;
      if (rel > report.worst) report.worst = rel;
    }
  }
  return report;
}

}  // namespace nsrnn::testing

#endif  // NSRNN_TESTS_ORACLES_HPP_
