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

#include "nsrnn/harness/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "nsrnn/config.hpp"
#include "nsrnn/tensor/rng.hpp"

namespace nsrnn {

Dataset generate_dataset(const std::string& task, const std::map<std::string, double>& params,
                         int lmin, int lmax, int count, uint64_t seed) {
  Pcfg grammar = refactor_remove_epsilon_unary(build_task_grammar(task, params));
  LengthTable table = compute_table(grammar, lmax);
  Rng rng(seed);
  Dataset d;
  d.task = task;
  d.params = params;
  d.lmin = lmin;
  d.lmax = lmax;
  d.seed = seed;
  d.alphabet = grammar.terminals;
  d.strings = sample_dataset(grammar, table, lmin, lmax, count, rng);
  d.log_g.reserve(d.strings.size());
  d.log_p_sample.reserve(d.strings.size());
  for (const std::string& w : d.strings) {
    d.log_g.push_back(std::log(inside(grammar, w)));
    d.log_p_sample.push_back(log_p_sample(grammar, table, lmin, lmax, w));
  }
  return d;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move file into place: " + path);
  }
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::string text;
  for (const std::string& w : d.strings) {
    text += w;
    text += '\n';
  }
  atomic_write_file(path, text);

  nlohmann::json j;
  j["version"] = kDatasetVersion;
  j["task"] = d.task;
  j["params"] = d.params;
  j["lmin"] = d.lmin;
  j["lmax"] = d.lmax;
  j["seed"] = d.seed;
  j["alphabet"] = d.alphabet;
  j["log_g"] = d.log_g;
  j["log_p_sample"] = d.log_p_sample;
  atomic_write_file(path + ".json", j.dump());
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  Dataset d;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) d.strings.push_back(line);
  }
  std::ifstream side(path + ".json");
  if (!side) throw std::runtime_error("missing dataset sidecar " + path + ".json");
  nlohmann::json j = nlohmann::json::parse(side);
  if (j.at("version").get<int>() != kDatasetVersion) {
    throw std::runtime_error("unsupported dataset version in " + path);
  }
  d.task = j.at("task").get<std::string>();
  d.params = j.at("params").get<std::map<std::string, double>>();
  d.lmin = j.at("lmin").get<int>();
  d.lmax = j.at("lmax").get<int>();
  d.seed = j.at("seed").get<uint64_t>();
  d.alphabet = j.at("alphabet").get<std::string>();
  d.log_g = j.at("log_g").get<std::vector<double>>();
  d.log_p_sample = j.at("log_p_sample").get<std::vector<double>>();
  if (d.log_g.size() != d.strings.size() || d.log_p_sample.size() != d.strings.size()) {
    throw std::runtime_error("dataset sidecar does not match string count in " + path);
  }
  return d;
}

}  // namespace nsrnn
