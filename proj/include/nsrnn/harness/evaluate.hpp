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

#ifndef NSRNN_HARNESS_EVALUATE_HPP_
#define NSRNN_HARNESS_EVALUATE_HPP_

#include <string>
#include <vector>

#include "nsrnn/controllers/models.hpp"
#include "nsrnn/harness/dataset.hpp"

namespace nsrnn {

// Per-symbol cross-entropy accumulator: total -log p over total
// symbols.  The model side never scores an end-of-string event (the
// model predicts symbols only), so its value estimates the strings'
// probability given their lengths.
struct CrossEntropy {
  double total_nats = 0;
  int64_t total_symbols = 0;
  double per_symbol() const { return total_nats / static_cast<double>(total_symbols); }
};

// Alphabet positions of each character of w; throws on a character
// the model does not know.
std::vector<int> symbol_indices(const std::string& alphabet, const std::string& w);

// Total negative log-likelihood per string, shape [batch]; all
// strings must share one length.  Differentiable when `bound` came
// from a tape.
Tensor batch_nll(const Model& m, const std::vector<Tensor>& bound,
                 const std::vector<const std::string*>& batch);

CrossEntropy model_cross_entropy(const Model& m, const std::vector<std::string>& strings,
                                 int batch_size = 10);
CrossEntropy source_cross_entropy(const std::vector<std::string>& strings,
                                  const std::vector<double>& log_true);

// H(dataset, model) - H(dataset, sampling distribution), in nats per
// symbol. The reference is log_p_sample: the data follows the
// length-restricted sampler, not the raw grammar, so this difference
// approximates a KL divergence and a perfect model scores zero.
double cross_entropy_diff(const Model& m, const Dataset& d, int batch_size = 10);

struct LengthRow {
  int length;
  double ce_diff;
};

struct LengthEvaluation {
  std::vector<LengthRow> rows;
  std::vector<int> skipped;  // lengths the grammar cannot produce
};

// Samples `per_length` strings at every achievable length in [lmin,
// lmax] and reports the cross-entropy difference per length.  The
// sampling seed is derived from the task name alone, so every model
// and restart sees the same test strings.
LengthEvaluation evaluate_by_length(const Model& m, const std::string& task,
                                    const std::map<std::string, double>& params, int lmin,
                                    int lmax, int per_length, int batch_size = 10);

// CSV with header `length,ce_diff`, one row per achievable length.
std::string format_length_csv(const LengthEvaluation& ev);
void write_length_csv(const LengthEvaluation& ev, const std::string& path);

}  // namespace nsrnn

#endif  // NSRNN_HARNESS_EVALUATE_HPP_
