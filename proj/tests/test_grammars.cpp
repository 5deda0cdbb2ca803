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
#include <map>
#include <string>
#include <vector>

#include "nsrnn/grammars/pcfg.hpp"
#include "nsrnn/grammars/sampling.hpp"
#include "oracles.hpp"

using namespace nsrnn;
using nsrnn::testing::enumerate_language;

TEST_CASE("continuation and stop weights are exact complements") {
  CHECK(stop_weight(60) == 1.0 / 61);
  CHECK(stop_weight(30) == 1.0 / 31);
  CHECK(recursion_weight(60) == doctest::Approx(60.0 / 61).epsilon(1e-15));
  // A mean of mu means the recursive branch fires mu times on average:
  // mu = f / (1 - f).
  double f = recursion_weight(7);
  CHECK(f / (1 - f) == doctest::Approx(7).epsilon(1e-12));
}

TEST_CASE("all five task grammars are probabilistic and well formed") {
  REQUIRE(task_names().size() == 5);
  for (const std::string& task : task_names()) {
    Pcfg g = build_task_grammar(task);
    validate_pcfg(g);
    CHECK(probabilistic_violations(g).empty());
  }
  CHECK_THROWS(build_task_grammar("palindrome"));
  CHECK_THROWS(build_task_grammar("dyck", {{"bogus", 1.0}}));
  CHECK_THROWS(build_task_grammar("dyck", {{"nesting", -1.0}}));
}

TEST_CASE("marked reversal has the textbook three rules") {
  Pcfg g = build_task_grammar("marked-reversal");
  REQUIRE(g.rules.size() == 3);
  double half_go = 0.5 * recursion_weight(60);
  int with_marker = 0;
  for (const GrammarRule& r : g.rules) {
    if (r.rhs.size() == 1) {
      CHECK(r.rhs[0] == GrammarSym::term('#'));
      CHECK(r.weight == stop_weight(60));
      ++with_marker;
    } else {
      REQUIRE(r.rhs.size() == 3);
      CHECK(r.rhs[0].is_terminal);
      CHECK(r.rhs[2] == r.rhs[0]);
      CHECK(r.rhs[1] == GrammarSym::nt(0));
      CHECK(r.weight == half_go);
    }
  }
  CHECK(with_marker == 1);
}

TEST_CASE("refactoring preserves every non-empty string weight") {
  for (const std::string& task : task_names()) {
    Pcfg g = build_task_grammar(task);
    double empty_mass = -1;
    Pcfg r = refactor_remove_epsilon_unary(g, &empty_mass);
    CHECK_FALSE(r.has_epsilon_rules());
    CHECK_FALSE(r.has_unary_rules());

    int cap = task == "hardest-cfl" ? 8 : 6;
    std::map<std::string, double> before = enumerate_language(g, cap);
    std::map<std::string, double> after = enumerate_language(r, cap);
    CHECK(std::fabs(empty_mass - (before.count("") ? before[""] : 0.0)) < 1e-15);
    CHECK(after.count("") == 0);
    for (const auto& kv : before) {
      if (kv.first.empty()) continue;
      INFO(task << " string " << kv.first);
      double rw = after.count(kv.first) ? after[kv.first] : 0.0;
      CHECK(std::fabs(kv.second - rw) <= 1e-14 * std::max(1.0, std::fabs(kv.second)));
    }
    for (const auto& kv : after) {
      CHECK(before.count(kv.first) == 1);
    }
  }
}

TEST_CASE("refactoring a grammar with nothing to remove is the identity") {
  Pcfg g = build_task_grammar("marked-reversal");
  Pcfg r = refactor_remove_epsilon_unary(g);
  REQUIRE(r.rules.size() == g.rules.size());
  for (size_t i = 0; i < g.rules.size(); ++i) {
    CHECK(r.rules[i].lhs == g.rules[i].lhs);
    CHECK(r.rules[i].rhs == g.rules[i].rhs);
    CHECK(r.rules[i].weight == g.rules[i].weight);  // bit-exact
  }
}

TEST_CASE("refactoring rejects degenerate grammars") {
  // A unary cycle whose chain weights sum to a divergent series.
  Pcfg cyc;
  cyc.add_nonterminal("S");
  cyc.add_nonterminal("A");
  cyc.add_terminal('a');
  cyc.rules.push_back({0, {GrammarSym::nt(1)}, 1.0});
  cyc.rules.push_back({1, {GrammarSym::nt(0)}, 1.0});
  cyc.rules.push_back({1, {GrammarSym::term('a')}, 0.5});
  CHECK_THROWS(refactor_remove_epsilon_unary(cyc));

  // A convergent cycle is fine: the closed chain weight is finite.
  Pcfg half = cyc;
  half.rules[1].weight = 0.5;
  CHECK_NOTHROW(refactor_remove_epsilon_unary(half));

  // Start symbol that only derives the empty string.
  Pcfg empty;
  empty.add_nonterminal("S");
  empty.rules.push_back({0, {}, 1.0});
  CHECK_THROWS(refactor_remove_epsilon_unary(empty));
}

TEST_CASE("unmarked reversal puts exactly the stop weight on the empty string") {
  Pcfg g = build_task_grammar("unmarked-reversal");
  double empty_mass = 0;
  refactor_remove_epsilon_unary(g, &empty_mass);
  CHECK(empty_mass == stop_weight(60));
}

TEST_CASE("length-table entries match exhaustive derivation sums") {
  Pcfg g = refactor_remove_epsilon_unary(build_task_grammar("marked-reversal"));
  LengthTable t = compute_table(g, 7);
  CHECK(t.at(0, 1) == stop_weight(60));
  CHECK(t.at(0, 2) == 0);
  CHECK(t.at(0, 4) == 0);
  std::map<std::string, double> lang = enumerate_language(g, 7);
  for (int len = 1; len <= 7; ++len) {
    double brute = nsrnn::testing::weight_of_length(lang, size_t(len));
    CHECK(std::fabs(t.at(0, len) - brute) <= 1e-15 * std::max(1.0, brute));
  }
}

TEST_CASE("compositions are lexicographic and complete") {
  std::vector<std::vector<int>> c = compositions(4, 2);
  REQUIRE(c.size() == 3);
  CHECK(c[0] == std::vector<int>{1, 3});
  CHECK(c[1] == std::vector<int>{2, 2});
  CHECK(c[2] == std::vector<int>{3, 1});
  CHECK(compositions(3, 1) == std::vector<std::vector<int>>{{3}});
  CHECK(compositions(2, 3).empty());
  CHECK(compositions(0, 0).size() == 1);
}

TEST_CASE("inside weights of the marked reversal are exact rationals") {
  Pcfg g = refactor_remove_epsilon_unary(build_task_grammar("marked-reversal"));
  CHECK(inside(g, "#") == 1.0 / 61);
  CHECK(inside(g, "0#0") == 30.0 / 3721);
  CHECK(inside(g, "1#1") == 30.0 / 3721);
  CHECK(inside(g, "0#1") == 0);
  CHECK(inside(g, "00") == 0);
  CHECK(inside(g, "") == 0);
}

TEST_CASE("inside agrees with exhaustive enumeration on Dyck strings") {
  Pcfg g = build_task_grammar("dyck");
  Pcfg r = refactor_remove_epsilon_unary(g);
  std::map<std::string, double> lang = enumerate_language(g, 6);
  for (const auto& kv : lang) {
    if (kv.first.empty()) continue;
    INFO("string " << kv.first);
    CHECK(std::fabs(inside(r, kv.first) - kv.second) <=
          1e-13 * std::max(1.0, std::fabs(kv.second)));
  }
}

TEST_CASE("unachievable lengths are reported and skipped") {
  Pcfg g = refactor_remove_epsilon_unary(build_task_grammar("marked-reversal"));
  LengthTable t = compute_table(g, 4);
  CHECK(achievable_lengths(t, 1, 3) == 2);  // lengths 1 and 3
  CHECK(achievable_lengths(t, 2, 2) == 0);
  Rng rng(5);
  CHECK_THROWS_AS(sample_sized(g, t, 0, 2, rng), UnachievableLengthError);
  CHECK_THROWS(sample_dataset(g, t, 2, 2, 5, rng));
  // Redraws land only on achievable lengths.
  std::vector<std::string> drawn = sample_dataset(g, t, 1, 4, 200, rng);
  for (const std::string& w : drawn) {
    CHECK((w.size() == 1 || w.size() == 3));
  }
}

TEST_CASE("sampling the marked reversal on [1,3] splits evenly across lengths") {
  Pcfg g = refactor_remove_epsilon_unary(build_task_grammar("marked-reversal"));
  LengthTable t = compute_table(g, 3);
  CHECK(p_sample(g, t, 1, 3, "#") == 0.5);
  CHECK(log_p_sample(g, t, 1, 3, "#") == doctest::Approx(std::log(0.5)).epsilon(1e-15));
  // "0#0" carries half the length-3 mass, and length 3 carries half of
  // the range's: 0.25 overall.
  CHECK(p_sample(g, t, 1, 3, "0#0") == doctest::Approx(0.25).epsilon(1e-14));

  Rng rng(11);
  std::vector<std::string> drawn = sample_dataset(g, t, 1, 3, 10000, rng);
  int marker_only = 0;
  for (const std::string& w : drawn) marker_only += w == "#";
  CHECK(std::fabs(marker_only / 10000.0 - 0.5) < 0.03);
}

TEST_CASE("p_sample sums to one over a short range") {
  Pcfg g = refactor_remove_epsilon_unary(build_task_grammar("dyck"));
  LengthTable t = compute_table(g, 4);
  std::map<std::string, double> lang = enumerate_language(g, 4);
  double total = 0;
  for (const auto& kv : lang) {
    size_t len = kv.first.size();
    if (len >= 2 && len <= 4 && t.at(0, int(len)) > 0) {
      total += p_sample(g, t, 2, 4, kv.first);
    }
  }
  CHECK(total == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("grammar text format round-trips") {
  for (const std::string& task : task_names()) {
    Pcfg g = build_task_grammar(task);
    std::string text = format_pcfg(g);
    Pcfg back = parse_pcfg(text);
    CHECK(format_pcfg(back) == text);
    REQUIRE(back.rules.size() == g.rules.size());
    for (size_t i = 0; i < g.rules.size(); ++i) {
      CHECK(back.rules[i].weight == g.rules[i].weight);  // %.17g survives
    }
  }
  CHECK_THROWS(parse_pcfg("S -> a b\n"));         // missing weight marker
  CHECK_THROWS(parse_pcfg("S -> ab / 0.5\n"));    // multi-character terminal
}

TEST_CASE("probabilistic violations are reported per left-hand side") {
  Pcfg g = build_task_grammar("marked-reversal");
  g.rules[0].weight += 0.25;
  std::vector<std::string> bad = probabilistic_violations(g);
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].find("S") != std::string::npos);
}
