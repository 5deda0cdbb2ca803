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

#ifndef NSRNN_HARNESS_TRAIN_HPP_
#define NSRNN_HARNESS_TRAIN_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "nsrnn/harness/evaluate.hpp"

namespace nsrnn {

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 10;     // same-length strings per batch
  double clip = 5;         // global gradient norm threshold
  int decay_patience = 5;  // stagnant epochs before one x0.9 decay
  double decay_factor = 0.9;
  int stop_patience = 10;  // stagnant epochs before stopping
  int max_epochs = 50;
  uint64_t seed = 0;       // batch sampling
  int eval_batch = 10;
};

struct EpochMetrics {
  int epoch;  // 1-based
  double train_ce;
  double valid_ce;
  double valid_ce_diff;
  double lr;
};

struct TrainResult {
  std::vector<EpochMetrics> curve;
  double best_valid_diff = 0;
  int best_epoch = 0;  // 0 when no epoch ran
};

// CSV with header `epoch,train_ce,valid_ce,valid_ce_diff,lr`.
std::string format_metrics_csv(const std::vector<EpochMetrics>& curve);
void write_metrics_csv(const std::vector<EpochMetrics>& curve, const std::string& path);

// Adam over batches of same-length strings: each batch picks a length
// from the training set's empirical length distribution, then strings
// of that length with replacement.  Validation runs every epoch; the
// learning rate decays once per stagnant stretch and training stops
// when validation has not improved for stop_patience epochs.  The
// model is left holding its best-validation parameters.  A NaN loss
// aborts with the offending batch recorded in the error message.
TrainResult train(Model& model, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& cfg);

struct RestartResult {
  uint64_t seed = 0;  // model init; batch seed derives from it
  TrainResult result;
};

struct GridCell {
  double learning_rate = 0;
  int stack_embedding = 0;  // 0 keeps the base config's value
  std::vector<RestartResult> restarts;
  double mean_diff = 0;  // mean best validation difference
};

struct GridSearchResult {
  std::vector<GridCell> cells;
  size_t best_cell = 0;  // lowest mean_diff
  // Restart with the lowest best validation difference overall.
  size_t best_cell_by_min = 0;
  int best_restart = 0;
};

// Trains `restarts` fresh models per grid cell with seeds derived
// from `seed`, selecting the cell with the lowest mean validation
// difference.  Pass an empty embeddings list to keep the base
// config's width (the stack reading of the two baseline model kinds
// is the only gridded width).  When curve_prefix is non-empty, every
// restart's metrics land in curve_prefix + "lr<LR>-e<EMB>-r<N>.csv".
GridSearchResult grid_search(const ModelConfig& base, const std::vector<double>& learning_rates,
                             const std::vector<int>& embeddings, const Dataset& train_set,
                             const Dataset& valid_set, const TrainConfig& cfg, int restarts,
                             uint64_t seed, const std::string& curve_prefix = "");

}  // namespace nsrnn

#endif  // NSRNN_HARNESS_TRAIN_HPP_
