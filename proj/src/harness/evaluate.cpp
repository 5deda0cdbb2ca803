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

#include "nsrnn/harness/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "nsrnn/config.hpp"
#include "nsrnn/tensor/rng.hpp"

namespace nsrnn {

std::vector<int> symbol_indices(const std::string& alphabet, const std::string& w) {
  std::vector<int> out;
  out.reserve(w.size());
  for (char c : w) {
    size_t i = alphabet.find(c);
    if (i == std::string::npos) {
      throw std::invalid_argument(std::string("symbol ") + c + " not in model alphabet");
    }
    out.push_back(static_cast<int>(i));
  }
  return out;
}

Tensor batch_nll(const Model& m, const std::vector<Tensor>& bound,
                 const std::vector<const std::string*>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const ModelConfig& cfg = m.config();
  int b = static_cast<int>(batch.size());
  int n = static_cast<int>(batch[0]->size());
  if (n == 0) throw std::invalid_argument("cannot score an empty string");
  std::vector<std::vector<int>> ids(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    if (static_cast<int>(batch[i]->size()) != n) {
      throw std::invalid_argument("batch mixes string lengths");
    }
    ids[i] = symbol_indices(cfg.alphabet, *batch[i]);
  }
  ModelRun run(m, bound, b);
  int width = cfg.num_symbols() + 1;
  Tensor total;
  std::vector<int> in_ids(batch.size()), targets(batch.size());
  for (int t = 0; t < n; ++t) {
    for (size_t i = 0; i < batch.size(); ++i) {
      in_ids[i] = t == 0 ? cfg.bos_index() : ids[i][static_cast<size_t>(t) - 1];
      targets[i] = ids[i][static_cast<size_t>(t)];
    }
    Tensor dist = run.step(constant(one_hot_rows(in_ids, width)), t + 1 < n);
    Tensor nll = nll_loss(dist, targets, static_cast<real_t>(kLogFloor));
    total = t == 0 ? nll : add(total, nll);
  }
  return total;
}

CrossEntropy model_cross_entropy(const Model& m, const std::vector<std::string>& strings,
                                 int batch_size) {
  std::map<int, std::vector<const std::string*>> by_length;
  for (const std::string& w : strings) {
    by_length[static_cast<int>(w.size())].push_back(&w);
  }
  std::vector<Tensor> bound = m.bind(nullptr);
  CrossEntropy ce;
  for (const auto& kv : by_length) {
    const std::vector<const std::string*>& group = kv.second;
    for (size_t lo = 0; lo < group.size(); lo += static_cast<size_t>(batch_size)) {
      size_t hi = std::min(group.size(), lo + static_cast<size_t>(batch_size));
      std::vector<const std::string*> chunk(group.begin() + static_cast<long>(lo),
                                            group.begin() + static_cast<long>(hi));
      Tensor nll = batch_nll(m, bound, chunk);
      const TensorValue& v = nll.value();
      for (int64_t i = 0; i < v.numel(); ++i) ce.total_nats += v[i];
      ce.total_symbols += static_cast<int64_t>(hi - lo) * kv.first;
    }
  }
  return ce;
}

CrossEntropy source_cross_entropy(const std::vector<std::string>& strings,
                                  const std::vector<double>& log_true) {
  if (strings.size() != log_true.size()) {
    throw std::invalid_argument("log-probability list does not match string count");
  }
  CrossEntropy ce;
  for (size_t i = 0; i < strings.size(); ++i) {
    ce.total_nats -= log_true[i];
    ce.total_symbols += static_cast<int64_t>(strings[i].size());
  }
  return ce;
}

double cross_entropy_diff(const Model& m, const Dataset& d, int batch_size) {
  if (d.log_p_sample.size() != d.strings.size()) {
    throw std::invalid_argument("dataset is missing its sampling log-probabilities");
  }
  return model_cross_entropy(m, d.strings, batch_size).per_symbol() -
         source_cross_entropy(d.strings, d.log_p_sample).per_symbol();
}

LengthEvaluation evaluate_by_length(const Model& m, const std::string& task,
                                    const std::map<std::string, double>& params, int lmin,
                                    int lmax, int per_length, int batch_size) {
  Pcfg grammar = refactor_remove_epsilon_unary(build_task_grammar(task, params));
  LengthTable table = compute_table(grammar, lmax);
  LengthEvaluation ev;
  for (int len = lmin; len <= lmax; ++len) {
    if (table.at(0, len) <= 0) {
      ev.skipped.push_back(len);
      continue;
    }
    Rng rng(mix_seed(hash_seed(task), static_cast<uint64_t>(len)));
    std::vector<std::string> strings;
    std::vector<double> log_true;
    strings.reserve(static_cast<size_t>(per_length));
    // The reference is the sampling distribution itself: grammar weight
    // conditioned on the drawn length.
    double log_len_mass = std::log(table.at(0, len));
    for (int i = 0; i < per_length; ++i) {
      strings.push_back(sample_sized(grammar, table, 0, len, rng));
      log_true.push_back(std::log(inside(grammar, strings.back())) - log_len_mass);
    }
    double diff = model_cross_entropy(m, strings, batch_size).per_symbol() -
                  source_cross_entropy(strings, log_true).per_symbol();
    ev.rows.push_back({len, diff});
  }
  return ev;
}

std::string format_length_csv(const LengthEvaluation& ev) {
  std::string out = "length,ce_diff\n";
  char buf[64];
  for (const LengthRow& row : ev.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g\n", row.length, row.ce_diff);
    out += buf;
  }
  return out;
}

void write_length_csv(const LengthEvaluation& ev, const std::string& path) {
  atomic_write_file(path, format_length_csv(ev));
}

}  // namespace nsrnn
