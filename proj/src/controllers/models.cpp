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

#include "nsrnn/controllers/models.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace nsrnn {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Ns: return "ns";
    case ModelKind::Superposition: return "superposition";
    case ModelKind::Stratification: return "stratification";
    case ModelKind::Lstm: return "lstm";
  }
  throw std::logic_error("model_kind_name: bad kind");
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "ns") return ModelKind::Ns;
  if (name == "superposition") return ModelKind::Superposition;
  if (name == "stratification") return ModelKind::Stratification;
  if (name == "lstm") return ModelKind::Lstm;
  throw std::invalid_argument("unknown model kind " + name);
}

int ModelConfig::reading_size() const {
  switch (kind) {
    case ModelKind::Ns: return stack_symbols;
    case ModelKind::Superposition:
    case ModelKind::Stratification: return stack_embedding;
    case ModelKind::Lstm: return 0;
  }
  throw std::logic_error("reading_size: bad kind");
}

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
  if (cfg_.alphabet.empty()) throw std::invalid_argument("model: empty alphabet");
  Rng rng(seed);
  int d = cfg_.hidden_size;
  lstm_ = std::make_unique<LstmCell>(store_, "lstm", cfg_.input_size(), d, rng);
  int v = cfg_.num_symbols();
  out_w_ = store_.add("out.w", xavier_init(v, d, rng));
  out_b_ = store_.add("out.b", uniform_init({v}, rng));
  switch (cfg_.kind) {
    case ModelKind::Ns: {
      int q = cfg_.states, g = cfg_.stack_symbols;
      int na = q * g * q * (2 * g + 1);
      act_w_ = store_.add("actions.w", xavier_init(na, d, rng));
      act_b_ = store_.add("actions.b", uniform_init({na}, rng));
      break;
    }
    case ModelKind::Superposition:
      act_w_ = store_.add("actions.w", xavier_init(3, d, rng));
      act_b_ = store_.add("actions.b", uniform_init({3}, rng));
      push_w_ = store_.add("push.w", xavier_init(cfg_.stack_embedding, d, rng));
      push_b_ = store_.add("push.b", uniform_init({cfg_.stack_embedding}, rng));
      break;
    case ModelKind::Stratification:
      act_w_ = store_.add("actions.w", xavier_init(2, d, rng));
      act_b_ = store_.add("actions.b", uniform_init({2}, rng));
      push_w_ = store_.add("push.w", xavier_init(cfg_.stack_embedding, d, rng));
      push_b_ = store_.add("push.b", uniform_init({cfg_.stack_embedding}, rng));
      break;
    case ModelKind::Lstm:
      break;
  }
}

std::vector<Tensor> Model::bind(Tape* tape) const {
  if (tape) return store_.bind(*tape);
  std::vector<Tensor> out;
  out.reserve(store_.size());
  for (size_t i = 0; i < store_.size(); ++i) {
    out.push_back(constant(store_.param(static_cast<int>(i)).value));
  }
  return out;
}

ModelRun::ModelRun(const Model& model, std::vector<Tensor> bound, int batch)
    : m_(model), bound_(std::move(bound)), batch_(batch) {
  const ModelConfig& cfg = m_.cfg_;
  state_ = m_.lstm_->initial_state(batch);
  ones_ = constant(TensorValue::full({batch}, 1));
  switch (cfg.kind) {
    case ModelKind::Ns:
      stack_ = std::make_unique<NondeterministicStack>(
          StackDims{batch, cfg.states, cfg.stack_symbols}, Semiring::Log, cfg.block);
      reading_ = stack_->reading();
      break;
    case ModelKind::Superposition:
    case ModelKind::Stratification:
      reading_ = constant(TensorValue::zeros({batch, cfg.stack_embedding}));
      break;
    case ModelKind::Lstm:
      reading_ = constant(TensorValue::zeros({batch, 0}));
      break;
  }
}

Tensor ModelRun::step(const Tensor& input, bool advance_stack) {
  Shape expect{batch_, m_.cfg_.num_symbols() + 1};
  if (!same_shape(input.shape(), expect)) {
    throw std::invalid_argument("model step: input shape " + shape_to_string(input.shape()) +
                                ", expected " + shape_to_string(expect));
  }
  Tensor controller_in =
      m_.cfg_.reading_size() > 0 ? concat_last({input, reading_}) : input;
  state_ = m_.lstm_->step(bound_, controller_in, state_);
  Tensor dist = softmax_last(linear(state_.h, bound_[static_cast<size_t>(m_.out_w_)],
                                    bound_[static_cast<size_t>(m_.out_b_)]));
  if (advance_stack) advance(state_.h);
  return dist;
}

void ModelRun::advance(const Tensor& hidden) {
  const ModelConfig& cfg = m_.cfg_;
  auto head = [&](int w, int b) {
    return linear(hidden, bound_[static_cast<size_t>(w)], bound_[static_cast<size_t>(b)]);
  };
  switch (cfg.kind) {
    case ModelKind::Ns: {
      int q = cfg.states, g = cfg.stack_symbols;
      // Normalize per (state, top symbol) over (next state, action).
      Tensor logits = reshape(head(m_.act_w_, m_.act_b_), {batch_, q * g, q * (2 * g + 1)});
      Tensor delta = reshape(log_softmax_last(logits), {batch_, q, g, q, 2 * g + 1});
      reading_ = stack_->step(delta);
      break;
    }
    case ModelKind::Superposition: {
      Tensor a = softmax_last(head(m_.act_w_, m_.act_b_));  // push, pop, no-op
      Tensor pu = reshape(slice_last(a, 0, 1), {batch_});
      Tensor po = reshape(slice_last(a, 1, 2), {batch_});
      Tensor pn = reshape(slice_last(a, 2, 3), {batch_});
      Tensor v = sigmoid(head(m_.push_w_, m_.push_b_));
      size_t sz = cells_.size();
      std::vector<Tensor> next(sz + 1);
      for (size_t i = 0; i <= sz; ++i) {
        // Interpolate what lands in cell i: the cell above (or the
        // pushed vector) if pushing, itself if holding, the one below
        // if popping.
        Tensor cell = mul_bcast_last(i == 0 ? v : cells_[i - 1], pu);
        if (i < sz) cell = add(cell, mul_bcast_last(cells_[i], pn));
        if (i + 1 < sz) cell = add(cell, mul_bcast_last(cells_[i + 1], po));
        next[i] = cell;
      }
      cells_ = std::move(next);
      reading_ = cells_[0];
      break;
    }
    case ModelKind::Stratification: {
      Tensor du = sigmoid(head(m_.act_w_, m_.act_b_));
      Tensor push_strength = reshape(slice_last(du, 0, 1), {batch_});
      Tensor pop_amount = reshape(slice_last(du, 1, 2), {batch_});
      Tensor v = tanh(head(m_.push_w_, m_.push_b_));
      // Erase `pop_amount` of strength from the top down.
      Tensor consumed = constant(TensorValue::zeros({batch_}));
      for (size_t i = 0; i < strengths_.size(); ++i) {
        Tensor take = relu(sub(pop_amount, consumed));
        Tensor reduced = relu(sub(strengths_[i], take));
        consumed = add(consumed, strengths_[i]);
        strengths_[i] = reduced;
      }
      cells_.insert(cells_.begin(), v);
      strengths_.insert(strengths_.begin(), push_strength);
      // Read the top unit of thickness.
      Tensor above = constant(TensorValue::zeros({batch_}));
      Tensor r = constant(TensorValue::zeros({batch_, cfg.stack_embedding}));
      for (size_t i = 0; i < strengths_.size(); ++i) {
        Tensor thickness = minimum(strengths_[i], relu(sub(ones_, above)));
        r = add(r, mul_bcast_last(cells_[i], thickness));
        above = add(above, strengths_[i]);
      }
      reading_ = r;
      break;
    }
    case ModelKind::Lstm:
      break;
  }
}

TensorValue one_hot_rows(const std::vector<int>& ids, int width) {
  TensorValue v = TensorValue::zeros({static_cast<int64_t>(ids.size()), width});
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= width) throw std::invalid_argument("one_hot_rows: id out of range");
    v[static_cast<int64_t>(i) * width + ids[i]] = 1;
  }
  return v;
}

namespace {

nlohmann::json shape_to_json(const Shape& s) {
  nlohmann::json a = nlohmann::json::array();
  for (int64_t d : s) a.push_back(d);
  return a;
}

}  // namespace

void Model::save(const std::string& path) const {
  nlohmann::json j;
  j["version"] = kCheckpointVersion;
  j["config"] = {
      {"kind", model_kind_name(cfg_.kind)},
      {"alphabet", cfg_.alphabet},
      {"hidden_size", cfg_.hidden_size},
      {"states", cfg_.states},
      {"stack_symbols", cfg_.stack_symbols},
      {"stack_embedding", cfg_.stack_embedding},
      {"block", cfg_.block},
  };
  nlohmann::json params = nlohmann::json::array();
  for (size_t i = 0; i < store_.size(); ++i) {
    const Parameter& p = store_.param(static_cast<int>(i));
    params.push_back({{"name", p.name},
                      {"shape", shape_to_json(p.value.shape)},
                      {"data", p.value.data}});
  }
  j["params"] = std::move(params);
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    out << j.dump();
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("cannot move checkpoint into place: " + path);
  }
}

Model Model::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path);
  }
  const auto& c = j.at("config");
  ModelConfig cfg;
  cfg.kind = parse_model_kind(c.at("kind").get<std::string>());
  cfg.alphabet = c.at("alphabet").get<std::string>();
  cfg.hidden_size = c.at("hidden_size").get<int>();
  cfg.states = c.at("states").get<int>();
  cfg.stack_symbols = c.at("stack_symbols").get<int>();
  cfg.stack_embedding = c.at("stack_embedding").get<int>();
  cfg.block = c.at("block").get<int>();
  Model model(cfg, 0);
  for (const auto& pj : j.at("params")) {
    int id = model.store_.find(pj.at("name").get<std::string>());
    if (id < 0) throw std::runtime_error("checkpoint has unknown parameter");
    Parameter& p = model.store_.param(id);
    Shape shape;
    for (const auto& d : pj.at("shape")) shape.push_back(d.get<int64_t>());
    std::vector<real_t> data = pj.at("data").get<std::vector<real_t>>();
    p.value = TensorValue(std::move(shape), std::move(data));
    if (!same_shape(p.value.shape, p.m.shape)) {
      throw std::runtime_error("checkpoint parameter shape mismatch for " + p.name);
    }
  }
  return model;
}

}  // namespace nsrnn
