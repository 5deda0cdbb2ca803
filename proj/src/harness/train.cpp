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

#include "nsrnn/harness/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include "nsrnn/tensor/optim.hpp"
#include "nsrnn/tensor/rng.hpp"

namespace nsrnn {

std::string format_metrics_csv(const std::vector<EpochMetrics>& curve) {
  std::string out = "epoch,train_ce,valid_ce,valid_ce_diff,lr\n";
  char buf[160];
  for (const EpochMetrics& m : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", m.epoch, m.train_ce,
                  m.valid_ce, m.valid_ce_diff, m.lr);
    out += buf;
  }
  return out;
}

void write_metrics_csv(const std::vector<EpochMetrics>& curve, const std::string& path) {
  atomic_write_file(path, format_metrics_csv(curve));
}

TrainResult train(Model& model, const Dataset& train_set, const Dataset& valid_set,
                  const TrainConfig& cfg) {
  if (train_set.strings.empty() || valid_set.strings.empty()) {
    throw std::invalid_argument("training needs non-empty train and validation sets");
  }
  std::map<int, std::vector<const std::string*>> by_length;
  for (const std::string& w : train_set.strings) {
    by_length[static_cast<int>(w.size())].push_back(&w);
  }
  if (valid_set.log_p_sample.size() != valid_set.strings.size()) {
    throw std::invalid_argument("validation set is missing its sampling log-probabilities");
  }
  double valid_source =
      source_cross_entropy(valid_set.strings, valid_set.log_p_sample).per_symbol();

  Adam optimizer(model.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.clip});
  Rng rng(cfg.seed);
  int batches_per_epoch =
      static_cast<int>((train_set.strings.size() + static_cast<size_t>(cfg.batch_size) - 1) /
                       static_cast<size_t>(cfg.batch_size));

  TrainResult res;
  res.best_valid_diff = std::numeric_limits<double>::infinity();
  std::vector<TensorValue> best_params;
  int stagnant = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double epoch_nats = 0;
    int64_t epoch_symbols = 0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      // Empirical length choice: any training string's length, then
      // same-length strings with replacement.
      size_t pick = static_cast<size_t>(rng.uniform_int(train_set.strings.size()));
      const std::vector<const std::string*>& pool =
          by_length[static_cast<int>(train_set.strings[pick].size())];
      std::vector<const std::string*> batch(static_cast<size_t>(cfg.batch_size));
      for (auto& slot : batch) {
        slot = pool[static_cast<size_t>(rng.uniform_int(pool.size()))];
      }
      int64_t symbols = static_cast<int64_t>(batch.size()) *
                        static_cast<int64_t>(batch.front()->size());
      Tape tape;
      std::vector<Tensor> bound = model.bind(&tape);
      Tensor nll = batch_nll(model, bound, batch);
      Tensor loss = scale(sum_all(nll), static_cast<real_t>(1.0 / static_cast<double>(symbols)));
      double loss_value = loss.value()[0];
      if (std::isnan(loss_value)) {
        std::string note;
        for (const std::string* w : batch) note += " " + *w;
        throw std::runtime_error("NaN loss in epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b) + ":" + note);
      }
      tape.backward(loss);
      optimizer.step(tape, bound);
      epoch_nats += loss_value * static_cast<double>(symbols);
      epoch_symbols += symbols;
    }

    double valid_ce = model_cross_entropy(model, valid_set.strings, cfg.eval_batch).per_symbol();
    EpochMetrics m;
    m.epoch = epoch;
    m.train_ce = epoch_nats / static_cast<double>(epoch_symbols);
    m.valid_ce = valid_ce;
    m.valid_ce_diff = valid_ce - valid_source;
    m.lr = optimizer.lr();
    res.curve.push_back(m);

    if (m.valid_ce_diff < res.best_valid_diff) {
      res.best_valid_diff = m.valid_ce_diff;
      res.best_epoch = epoch;
      stagnant = 0;
      best_params.clear();
      for (size_t i = 0; i < model.params().size(); ++i) {
        best_params.push_back(model.params().param(static_cast<int>(i)).value);
      }
    } else {
      ++stagnant;
      if (stagnant == cfg.decay_patience) {
        optimizer.set_lr(optimizer.lr() * cfg.decay_factor);
      }
      if (stagnant >= cfg.stop_patience) break;
    }
  }
  for (size_t i = 0; i < best_params.size(); ++i) {
    model.params().param(static_cast<int>(i)).value = best_params[i];
  }
  return res;
}

GridSearchResult grid_search(const ModelConfig& base, const std::vector<double>& learning_rates,
                             const std::vector<int>& embeddings, const Dataset& train_set,
                             const Dataset& valid_set, const TrainConfig& cfg, int restarts,
                             uint64_t seed, const std::string& curve_prefix) {
  if (learning_rates.empty() || restarts < 1) {
    throw std::invalid_argument("grid search needs learning rates and at least one restart");
  }
  std::vector<int> widths = embeddings.empty() ? std::vector<int>{0} : embeddings;
  GridSearchResult out;
  double best_mean = std::numeric_limits<double>::infinity();
  double best_single = std::numeric_limits<double>::infinity();
  for (double lr : learning_rates) {
    for (int width : widths) {
      GridCell cell;
      cell.learning_rate = lr;
      cell.stack_embedding = width;
      ModelConfig mc = base;
      if (width > 0) mc.stack_embedding = width;
      double mean = 0;
      for (int r = 0; r < restarts; ++r) {
        RestartResult rr;
        rr.seed = mix_seed(seed, mix_seed(hash_seed(std::to_string(lr) + "/" +
                                                    std::to_string(width)),
                                          static_cast<uint64_t>(r)));
        Model model(mc, rr.seed);
        TrainConfig tc = cfg;
        tc.learning_rate = lr;
        tc.seed = mix_seed(rr.seed, 1);
        rr.result = train(model, train_set, valid_set, tc);
        mean += rr.result.best_valid_diff;
        if (!curve_prefix.empty()) {
          char name[96];
          std::snprintf(name, sizeof(name), "lr%g-e%d-r%d.csv", lr, width, r);
          write_metrics_csv(rr.result.curve, curve_prefix + name);
        }
        if (rr.result.best_valid_diff < best_single) {
          best_single = rr.result.best_valid_diff;
          out.best_cell_by_min = out.cells.size();
          out.best_restart = r;
        }
        cell.restarts.push_back(std::move(rr));
      }
      cell.mean_diff = mean / restarts;
      if (cell.mean_diff < best_mean) {
        best_mean = cell.mean_diff;
        out.best_cell = out.cells.size();
      }
      out.cells.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace nsrnn
