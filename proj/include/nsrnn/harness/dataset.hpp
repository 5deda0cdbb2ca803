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

#ifndef NSRNN_HARNESS_DATASET_HPP_
#define NSRNN_HARNESS_DATASET_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nsrnn/grammars/pcfg.hpp"
#include "nsrnn/grammars/sampling.hpp"

namespace nsrnn {

// Sampled strings plus the log-probabilities cached at generation
// time: log_p_sample is the string's weight under the
// length-restricted sampling distribution, which is the distribution
// the data actually follows and hence the reference side of
// cross-entropy differences; log_g is the raw grammar weight.
struct Dataset {
  std::string task;
  std::map<std::string, double> params;
  int lmin = 0;
  int lmax = 0;
  uint64_t seed = 0;
  std::string alphabet;
  std::vector<std::string> strings;
  std::vector<double> log_g;
  std::vector<double> log_p_sample;
};

Dataset generate_dataset(const std::string& task, const std::map<std::string, double>& params,
                         int lmin, int lmax, int count, uint64_t seed);

// Writes content to a temp file and renames it into place, so readers
// never observe a partial artifact.
void atomic_write_file(const std::string& path, const std::string& content);

// One string per line at `path`; the log-probabilities and generation
// parameters land in a JSON sidecar at `path` + ".json".  Writes are
// atomic (temp file + rename).
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace nsrnn

#endif  // NSRNN_HARNESS_DATASET_HPP_
