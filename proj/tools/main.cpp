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

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "nsrnn/harness/train.hpp"
#include "nsrnn/hardest_cfl/hardest_cfl.hpp"
#include "nsrnn/ns_stack/ns_stack.hpp"

namespace {

using namespace nsrnn;

std::map<std::string, double> parse_params(const std::vector<std::string>& kvs) {
  std::map<std::string, double> params;
  for (const std::string& kv : kvs) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--param", "expected name=value, got " + kv);
    }
    params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
  }
  return params;
}

int cmd_generate(const std::string& task, const std::vector<std::string>& raw_params, int lmin,
                 int lmax, int train_count, int valid_count, uint64_t seed,
                 const std::string& out_dir) {
  std::map<std::string, double> params = parse_params(raw_params);
  std::string prefix = out_dir + "/" + task;
  Dataset train_set = generate_dataset(task, params, lmin, lmax, train_count, mix_seed(seed, 0));
  save_dataset(train_set, prefix + "-train.txt");
  Dataset valid_set = generate_dataset(task, params, lmin, lmax, valid_count, mix_seed(seed, 1));
  save_dataset(valid_set, prefix + "-valid.txt");
  std::printf("wrote %s-train.txt (%zu strings) and %s-valid.txt (%zu strings)\n", prefix.c_str(),
              train_set.strings.size(), prefix.c_str(), valid_set.strings.size());
  return 0;
}

int cmd_train(const std::string& kind, const std::string& train_path,
              const std::string& valid_path, TrainConfig cfg, ModelConfig mc, int restarts,
              uint64_t seed, const std::string& checkpoint_path,
              const std::string& metrics_path) {
  Dataset train_set = load_dataset(train_path);
  Dataset valid_set = load_dataset(valid_path);
  mc.kind = parse_model_kind(kind);
  mc.alphabet = train_set.alphabet;
  if (restarts <= 1) {
    Model model(mc, seed);
    cfg.seed = mix_seed(seed, 1);
    TrainResult res = train(model, train_set, valid_set, cfg);
    if (!metrics_path.empty()) write_metrics_csv(res.curve, metrics_path);
    if (!checkpoint_path.empty()) model.save(checkpoint_path);
    std::printf("best validation difference %.6f nats at epoch %d\n", res.best_valid_diff,
                res.best_epoch);
    return 0;
  }
  std::string prefix;
  if (!metrics_path.empty()) {
    prefix = metrics_path;
    size_t dot = prefix.rfind(".csv");
    if (dot != std::string::npos) prefix = prefix.substr(0, dot);
    prefix += "-";
  }
  GridSearchResult gs = grid_search(mc, {cfg.learning_rate}, {}, train_set, valid_set, cfg,
                                    restarts, seed, prefix);
  const GridCell& cell = gs.cells[gs.best_cell_by_min];
  const RestartResult& best = cell.restarts[static_cast<size_t>(gs.best_restart)];
  if (!checkpoint_path.empty()) {
    // Retrain the winning restart to recover its best parameters.
    Model model(mc, best.seed);
    TrainConfig tc = cfg;
    tc.seed = mix_seed(best.seed, 1);
    train(model, train_set, valid_set, tc);
    model.save(checkpoint_path);
  }
  std::printf("best of %d restarts: validation difference %.6f nats (restart %d, epoch %d)\n",
              restarts, best.result.best_valid_diff, gs.best_restart, best.result.best_epoch);
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& task,
                 const std::vector<std::string>& raw_params, int lmin, int lmax, int per_length,
                 int batch, const std::string& out_path) {
  Model model = Model::load(checkpoint_path);
  LengthEvaluation ev =
      evaluate_by_length(model, task, parse_params(raw_params), lmin, lmax, per_length, batch);
  for (int len : ev.skipped) {
    std::printf("length %d is unachievable for %s, skipped\n", len, task.c_str());
  }
  if (out_path.empty()) {
    std::fputs(format_length_csv(ev).c_str(), stdout);
  } else {
    write_length_csv(ev, out_path);
    std::printf("wrote %s (%zu lengths)\n", out_path.c_str(), ev.rows.size());
  }
  return 0;
}

int cmd_inspect_wfa(const std::string& pda_path, const std::string& checkpoint_path,
                    const std::string& input, double threshold, const std::string& out_path) {
  WfaSnapshot snap;
  std::vector<std::string> state_names, stack_names;
  if (!pda_path.empty()) {
    WeightedPda pda = load_pda_file(pda_path);
    std::vector<TensorValue> deltas = pack_transitions(pda, input, Semiring::Real);
    NondeterministicStack stack({1, pda.num_states(), pda.num_stack_symbols()}, Semiring::Real);
    for (TensorValue& d : deltas) stack.step(constant(with_batch_axis(std::move(d))));
    snap = stack.wfa_snapshot(threshold);
    state_names = pda.state_names;
    stack_names = pda.stack_names;
  } else {
    Model model = Model::load(checkpoint_path);
    const ModelConfig& mc = model.config();
    if (mc.kind != ModelKind::Ns) {
      throw std::runtime_error("checkpoint inspection needs a model with the run-weight stack");
    }
    std::vector<Tensor> bound = model.bind(nullptr);
    ModelRun run(model, bound, 1);
    int width = mc.num_symbols() + 1;
    // Mirror the scoring pass, but keep the stack moving on the last
    // prediction too so every input symbol leaves a layer.
    run.step(constant(one_hot_rows({mc.bos_index()}, width)));
    for (size_t t = 0; t + 1 < input.size(); ++t) {
      run.step(constant(one_hot_rows(symbol_indices(mc.alphabet, input.substr(t, 1)), width)));
    }
    snap = run.stack()->wfa_snapshot(threshold);
    for (int q = 0; q < mc.states; ++q) state_names.push_back("q" + std::to_string(q + 1));
    stack_names.push_back("_");
    for (int x = 1; x < mc.stack_symbols; ++x) stack_names.push_back(std::to_string(x - 1));
  }
  std::string dot = wfa_to_dot(snap, state_names, stack_names);
  if (out_path.empty()) {
    std::fputs(dot.c_str(), stdout);
  } else {
    atomic_write_file(out_path, dot);
    std::printf("wrote %s (%zu nodes, %zu edges)\n", out_path.c_str(), snap.nodes.size(),
                snap.edges.size());
  }
  return 0;
}

int cmd_sample(const std::string& task, const std::string& grammar_path,
               const std::vector<std::string>& raw_params, int length, int count,
               uint64_t seed) {
  Pcfg grammar = grammar_path.empty() ? build_task_grammar(task, parse_params(raw_params))
                                      : load_pcfg_file(grammar_path);
  double empty_mass = 0;
  grammar = refactor_remove_epsilon_unary(grammar, &empty_mass);
  if (empty_mass > 0) {
    std::fprintf(stderr, "note: %.17g of the grammar's mass is on the empty string\n",
                 empty_mass);
  }
  LengthTable table = compute_table(grammar, length);
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    std::printf("%s\n", sample_sized(grammar, table, 0, length, rng).c_str());
  }
  return 0;
}

int cmd_hardest_encode(const std::string& grammar_path, const std::string& input) {
  GnfGrammar g = grammar_path.empty() ? toy_gnf_grammar() : load_gnf_file(grammar_path);
  std::printf("%s\n", apply_homomorphism(build_homomorphism(g), input).c_str());
  return 0;
}

int cmd_hardest_check(const std::string& input) {
  bool member = l0_membership(input);
  std::printf("%s\n", member ? "member" : "not a member");
  return member ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Language-model experiments on a run-weighted stack"};
  app.require_subcommand(1);

  std::string task = "marked-reversal", grammar_path, pda_path, checkpoint_path;
  std::string train_path, valid_path, out_path, metrics_path, input, kind = "ns";
  std::vector<std::string> raw_params;
  int lmin = 10, lmax = 20, train_count = 1000, valid_count = 200;
  int per_length = 20, length = 10, count = 10, restarts = 1;
  uint64_t seed = 1;
  double threshold = 0;
  TrainConfig cfg;
  ModelConfig mc;

  CLI::App* gen = app.add_subcommand("generate", "Sample train/valid datasets from a task PCFG");
  gen->add_option("--task", task)->check(CLI::IsMember(task_names()));
  gen->add_option("--param", raw_params, "grammar parameter override, name=value");
  gen->add_option("--min", lmin);
  gen->add_option("--max", lmax);
  gen->add_option("--train", train_count);
  gen->add_option("--valid", valid_count);
  gen->add_option("--seed", seed);
  gen->add_option("--out", out_path, "output directory")->default_val(".");

  CLI::App* tr = app.add_subcommand("train", "Train a model on generated datasets");
  tr->add_option("--model", kind, "ns, superposition, stratification, or lstm");
  tr->add_option("--train", train_path)->required();
  tr->add_option("--valid", valid_path)->required();
  tr->add_option("--lr", cfg.learning_rate);
  tr->add_option("--batch", cfg.batch_size);
  tr->add_option("--epochs", cfg.max_epochs);
  tr->add_option("--clip", cfg.clip);
  tr->add_option("--restarts", restarts);
  tr->add_option("--seed", seed);
  tr->add_option("--hidden", mc.hidden_size);
  tr->add_option("--states", mc.states);
  tr->add_option("--stack-symbols", mc.stack_symbols);
  tr->add_option("--embedding", mc.stack_embedding);
  tr->add_option("--block", mc.block);
  tr->add_option("--checkpoint", checkpoint_path);
  tr->add_option("--metrics", metrics_path);

  CLI::App* ev = app.add_subcommand("evaluate", "Cross-entropy difference per test length");
  ev->add_option("--checkpoint", checkpoint_path)->required();
  ev->add_option("--task", task)->check(CLI::IsMember(task_names()));
  ev->add_option("--param", raw_params);
  ev->add_option("--min", lmin);
  ev->add_option("--max", lmax);
  ev->add_option("--per-length", per_length);
  ev->add_option("--batch", cfg.eval_batch);
  ev->add_option("--out", out_path);

  CLI::App* wfa = app.add_subcommand("inspect-wfa", "Render the stack automaton as DOT");
  wfa->add_option("--pda", pda_path, "weighted PDA file");
  wfa->add_option("--checkpoint", checkpoint_path, "trained model checkpoint");
  wfa->add_option("--input", input)->required();
  wfa->add_option("--threshold", threshold);
  wfa->add_option("--out", out_path);

  CLI::App* sm = app.add_subcommand("sample", "Sample fixed-length strings from a grammar");
  sm->add_option("--task", task)->check(CLI::IsMember(task_names()));
  sm->add_option("--grammar", grammar_path, "grammar file instead of a named task");
  sm->add_option("--param", raw_params);
  sm->add_option("--length", length);
  sm->add_option("--count", count);
  sm->add_option("--seed", seed);

  CLI::App* hard = app.add_subcommand("hardest", "Block-language encoding and membership");
  hard->require_subcommand(1);
  CLI::App* enc = hard->add_subcommand("encode", "Print the block image of a string");
  enc->add_option("--grammar", grammar_path, "GNF grammar file (default: built-in toy grammar)");
  enc->add_option("--input", input)->required();
  CLI::App* chk = hard->add_subcommand("check", "Decide block-language membership");
  chk->add_option("--input", input)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      return cmd_generate(task, raw_params, lmin, lmax, train_count, valid_count, seed, out_path);
    }
    if (tr->parsed()) {
      return cmd_train(kind, train_path, valid_path, cfg, mc, restarts, seed, checkpoint_path,
                       metrics_path);
    }
    if (ev->parsed()) {
      return cmd_evaluate(checkpoint_path, task, raw_params, lmin, lmax, per_length,
                          cfg.eval_batch, out_path);
    }
    if (wfa->parsed()) {
      if (pda_path.empty() == checkpoint_path.empty()) {
        std::fprintf(stderr, "inspect-wfa needs exactly one of --pda or --checkpoint\n");
        return 2;
      }
      return cmd_inspect_wfa(pda_path, checkpoint_path, input, threshold, out_path);
    }
    if (sm->parsed()) {
      return cmd_sample(task, grammar_path, raw_params, length, count, seed);
    }
    if (hard->parsed()) {
      if (enc->parsed()) return cmd_hardest_encode(grammar_path, input);
      return cmd_hardest_check(input);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
