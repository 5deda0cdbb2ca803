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

#include "nsrnn/tensor/einsum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace nsrnn {

namespace {

constexpr real_t kNegInf = -std::numeric_limits<real_t>::infinity();

struct Plan {
  std::vector<std::string> inputs;  // index letters per operand
  std::string output;
  std::string sum_vars;  // letters summed out, in order of first appearance
};

Plan parse_plan(const std::string& spec) {
  Plan plan;
  auto arrow = spec.find("->");
  if (arrow == std::string::npos) {
    throw std::invalid_argument("einsum: spec missing '->': " + spec);
  }
  std::string lhs = spec.substr(0, arrow);
  plan.output = spec.substr(arrow + 2);
  std::string cur;
  for (char c : lhs) {
    if (c == ',') {
      plan.inputs.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  plan.inputs.push_back(cur);
  auto check_letters = [&spec](const std::string& s) {
    for (char c : s) {
      if (c < 'a' || c > 'z') {
        throw std::invalid_argument("einsum: bad index letter in spec: " + spec);
      }
    }
  };
  for (const std::string& in : plan.inputs) {
    check_letters(in);
    for (size_t i = 0; i < in.size(); ++i) {
      if (in.find(in[i], i + 1) != std::string::npos) {
        throw std::invalid_argument("einsum: repeated index letter within operand: " + spec);
      }
    }
  }
  check_letters(plan.output);
  for (size_t i = 0; i < plan.output.size(); ++i) {
    if (plan.output.find(plan.output[i], i + 1) != std::string::npos) {
      throw std::invalid_argument("einsum: repeated index letter in output: " + spec);
    }
  }
  for (char c : plan.output) {
    bool found = false;
    for (const std::string& in : plan.inputs) {
      if (in.find(c) != std::string::npos) found = true;
    }
    if (!found) {
      throw std::invalid_argument("einsum: output letter not in any input: " + spec);
    }
  }
  for (const std::string& in : plan.inputs) {
    for (char c : in) {
      if (plan.output.find(c) == std::string::npos &&
          plan.sum_vars.find(c) == std::string::npos) {
        plan.sum_vars.push_back(c);
      }
    }
  }
  return plan;
}

const Plan& get_plan(const std::string& spec) {
  static std::unordered_map<std::string, Plan> cache;
  auto it = cache.find(spec);
  if (it == cache.end()) it = cache.emplace(spec, parse_plan(spec)).first;
  return it->second;
}

// Everything the contraction loops need, precomputed once per call and
// shared between forward and backward.
struct Kernel {
  Semiring sr;
  int block;
  int nops;
  int ninst;
  Shape out_shape;
  int64_t out_numel;
  std::vector<int64_t> out_sizes;                 // per output letter
  std::vector<std::vector<int64_t>> out_strides;  // [op][output letter]
  int64_t sum_numel;
  std::vector<int64_t> sum_off;  // [op * sum_numel + sidx]
  std::vector<std::shared_ptr<const TensorValue>> vals;  // [inst * nops + op]

  const real_t* data(int inst, int op) const {
    return vals[static_cast<size_t>(inst * nops + op)]->data.data();
  }

  void forward(TensorValue& out) const;
  void backward(const TensorValue& g, const TensorValue& outv,
                const std::vector<real_t*>& grads) const;

 private:
  template <typename PerElement>
  void scan(PerElement&& f) const;
};

// Drives the output-space odometer and hands each output element's
// per-operand base offsets to `f`.
template <typename PerElement>
void Kernel::scan(PerElement&& f) const {
  int nov = static_cast<int>(out_sizes.size());
  std::vector<int64_t> oc(nov, 0);
  std::vector<int64_t> base(nops, 0);
  for (int64_t oidx = 0; oidx < out_numel; ++oidx) {
    f(oidx, base);
    for (int v = nov - 1; v >= 0; --v) {
      ++oc[v];
      for (int op = 0; op < nops; ++op) base[op] += out_strides[op][v];
      if (oc[v] < out_sizes[v]) break;
      for (int op = 0; op < nops; ++op) base[op] -= out_strides[op][v] * out_sizes[v];
      oc[v] = 0;
    }
  }
}

void Kernel::forward(TensorValue& out) const {
  std::vector<const real_t*> d(static_cast<size_t>(ninst) * nops);
  for (int inst = 0; inst < ninst; ++inst) {
    for (int op = 0; op < nops; ++op) d[static_cast<size_t>(inst * nops + op)] = data(inst, op);
  }
  if (sr == Semiring::Real) {
    scan([&](int64_t oidx, const std::vector<int64_t>& base) {
      real_t acc = 0;
      for (int inst = 0; inst < ninst; ++inst) {
        const real_t* const* di = d.data() + static_cast<size_t>(inst) * nops;
        for (int64_t s = 0; s < sum_numel; ++s) {
          real_t term = 1;
          for (int op = 0; op < nops; ++op) term *= di[op][base[op] + sum_off[op * sum_numel + s]];
          acc += term;
        }
      }
      out.data[static_cast<size_t>(oidx)] = acc;
    });
    return;
  }
  std::vector<real_t> terms(static_cast<size_t>(block));
  scan([&](int64_t oidx, const std::vector<int64_t>& base) {
    real_t run_max = kNegInf;
    real_t run_sum = 0;
    int nb = 0;
    auto flush = [&]() {
      if (nb == 0) return;
      real_t bm = terms[0];
      for (int i = 1; i < nb; ++i) bm = std::max(bm, terms[i]);
      real_t bs = 0;
      for (int i = 0; i < nb; ++i) bs += std::exp(terms[i] - bm);
      if (run_max == kNegInf) {
        run_max = bm;
        run_sum = bs;
      } else if (bm > run_max) {
        run_sum = run_sum * std::exp(run_max - bm) + bs;
        run_max = bm;
      } else {
        run_sum += bs * std::exp(bm - run_max);
      }
      nb = 0;
    };
    for (int inst = 0; inst < ninst; ++inst) {
      const real_t* const* di = d.data() + static_cast<size_t>(inst) * nops;
      for (int64_t s = 0; s < sum_numel; ++s) {
        real_t term = 0;
        for (int op = 0; op < nops; ++op) term += di[op][base[op] + sum_off[op * sum_numel + s]];
        if (term == kNegInf) continue;
        terms[static_cast<size_t>(nb++)] = term;
        if (nb == block) flush();
      }
    }
    flush();
    out.data[static_cast<size_t>(oidx)] = run_max == kNegInf ? kNegInf : run_max + std::log(run_sum);
  });
}

void Kernel::backward(const TensorValue& g, const TensorValue& outv,
                      const std::vector<real_t*>& grads) const {
  std::vector<const real_t*> d(static_cast<size_t>(ninst) * nops);
  for (int inst = 0; inst < ninst; ++inst) {
    for (int op = 0; op < nops; ++op) d[static_cast<size_t>(inst * nops + op)] = data(inst, op);
  }
  std::vector<real_t> entry(static_cast<size_t>(nops));
  std::vector<real_t> pre(static_cast<size_t>(nops) + 1);
  std::vector<real_t> suf(static_cast<size_t>(nops) + 1);
  scan([&](int64_t oidx, const std::vector<int64_t>& base) {
    real_t gv = g.data[static_cast<size_t>(oidx)];
    if (gv == 0) return;
    real_t ov = outv.data[static_cast<size_t>(oidx)];
    if (sr == Semiring::Log && ov == kNegInf) return;
    for (int inst = 0; inst < ninst; ++inst) {
      const real_t* const* di = d.data() + static_cast<size_t>(inst) * nops;
      real_t* const* gi = grads.data() + static_cast<size_t>(inst) * nops;
      for (int64_t s = 0; s < sum_numel; ++s) {
        if (sr == Semiring::Log) {
          real_t term = 0;
          for (int op = 0; op < nops; ++op) term += di[op][base[op] + sum_off[op * sum_numel + s]];
          if (term == kNegInf) continue;
          real_t w = gv * std::exp(term - ov);
          for (int op = 0; op < nops; ++op) {
            if (gi[op]) gi[op][base[op] + sum_off[op * sum_numel + s]] += w;
          }
        } else {
          for (int op = 0; op < nops; ++op) entry[static_cast<size_t>(op)] = di[op][base[op] + sum_off[op * sum_numel + s]];
          pre[0] = 1;
          for (int op = 0; op < nops; ++op) pre[static_cast<size_t>(op) + 1] = pre[static_cast<size_t>(op)] * entry[static_cast<size_t>(op)];
          suf[static_cast<size_t>(nops)] = 1;
          for (int op = nops - 1; op >= 0; --op) suf[static_cast<size_t>(op)] = suf[static_cast<size_t>(op) + 1] * entry[static_cast<size_t>(op)];
          for (int op = 0; op < nops; ++op) {
            if (gi[op]) gi[op][base[op] + sum_off[op * sum_numel + s]] += gv * pre[static_cast<size_t>(op)] * suf[static_cast<size_t>(op) + 1];
          }
        }
      }
    }
  });
}

}  // namespace

Tensor einsum_sum(Semiring sr, const std::string& spec,
                  const std::vector<std::vector<Tensor>>& instances, int block) {
  if (instances.empty()) throw std::invalid_argument("einsum_sum: empty instance list");
  if (block < 1) throw std::invalid_argument("einsum_sum: block must be positive");
  const Plan& plan = get_plan(spec);
  int nops = static_cast<int>(plan.inputs.size());
  int ninst = static_cast<int>(instances.size());
  for (const auto& inst : instances) {
    if (static_cast<int>(inst.size()) != nops) {
      throw std::invalid_argument("einsum_sum: operand count does not match spec " + spec);
    }
  }

  // Bind each index letter to a size from the first instance, then
  // require every other instance to carry identical shapes.
  std::unordered_map<char, int64_t> sizes;
  for (int op = 0; op < nops; ++op) {
    const Shape& sh = instances[0][static_cast<size_t>(op)].shape();
    const std::string& vars = plan.inputs[static_cast<size_t>(op)];
    if (sh.size() != vars.size()) {
      throw std::invalid_argument("einsum_sum: operand rank does not match spec " + spec);
    }
    for (size_t i = 0; i < vars.size(); ++i) {
      auto it = sizes.find(vars[i]);
      if (it == sizes.end()) {
        sizes[vars[i]] = sh[i];
      } else if (it->second != sh[i]) {
        throw std::invalid_argument("einsum_sum: inconsistent size for index '" +
                                    std::string(1, vars[i]) + "' in " + spec);
      }
    }
  }
  for (int inst = 1; inst < ninst; ++inst) {
    for (int op = 0; op < nops; ++op) {
      if (!same_shape(instances[static_cast<size_t>(inst)][static_cast<size_t>(op)].shape(),
                      instances[0][static_cast<size_t>(op)].shape())) {
        throw std::invalid_argument("einsum_sum: instance shapes differ");
      }
    }
  }

  auto kernel = std::make_shared<Kernel>();
  kernel->sr = sr;
  kernel->block = block;
  kernel->nops = nops;
  kernel->ninst = ninst;
  for (char c : plan.output) {
    kernel->out_shape.push_back(sizes.at(c));
    kernel->out_sizes.push_back(sizes.at(c));
  }
  kernel->out_numel = shape_numel(kernel->out_shape);

  // Row-major strides of each operand, mapped onto output and summed
  // letters; letters absent from an operand get stride zero.
  std::vector<std::vector<int64_t>> op_strides(static_cast<size_t>(nops));
  for (int op = 0; op < nops; ++op) {
    op_strides[static_cast<size_t>(op)] =
        row_major_strides(instances[0][static_cast<size_t>(op)].shape());
  }
  auto stride_of = [&](int op, char c) -> int64_t {
    const std::string& vars = plan.inputs[static_cast<size_t>(op)];
    auto pos = vars.find(c);
    if (pos == std::string::npos) return 0;
    return op_strides[static_cast<size_t>(op)][pos];
  };
  kernel->out_strides.assign(static_cast<size_t>(nops), {});
  for (int op = 0; op < nops; ++op) {
    for (char c : plan.output) kernel->out_strides[static_cast<size_t>(op)].push_back(stride_of(op, c));
  }

  Shape sum_shape;
  for (char c : plan.sum_vars) sum_shape.push_back(sizes.at(c));
  kernel->sum_numel = shape_numel(sum_shape);
  kernel->sum_off.assign(static_cast<size_t>(nops) * kernel->sum_numel, 0);
  {
    int nsv = static_cast<int>(plan.sum_vars.size());
    std::vector<int64_t> sc(static_cast<size_t>(nsv), 0);
    std::vector<int64_t> off(static_cast<size_t>(nops), 0);
    std::vector<std::vector<int64_t>> sum_strides(static_cast<size_t>(nops));
    for (int op = 0; op < nops; ++op) {
      for (char c : plan.sum_vars) sum_strides[static_cast<size_t>(op)].push_back(stride_of(op, c));
    }
    for (int64_t s = 0; s < kernel->sum_numel; ++s) {
      for (int op = 0; op < nops; ++op) kernel->sum_off[static_cast<size_t>(op * kernel->sum_numel + s)] = off[static_cast<size_t>(op)];
      for (int v = nsv - 1; v >= 0; --v) {
        ++sc[static_cast<size_t>(v)];
        for (int op = 0; op < nops; ++op) off[static_cast<size_t>(op)] += sum_strides[static_cast<size_t>(op)][static_cast<size_t>(v)];
        if (sc[static_cast<size_t>(v)] < sum_shape[static_cast<size_t>(v)]) break;
        for (int op = 0; op < nops; ++op) off[static_cast<size_t>(op)] -= sum_strides[static_cast<size_t>(op)][static_cast<size_t>(v)] * sum_shape[static_cast<size_t>(v)];
        sc[static_cast<size_t>(v)] = 0;
      }
    }
  }

  kernel->vals.reserve(static_cast<size_t>(ninst * nops));
  {
    std::set<const TensorValue*> checked;
    for (const auto& inst : instances) {
      for (const Tensor& t : inst) {
        auto p = t.ptr();
        if (checked.insert(p.get()).second && p->has_nan()) {
          throw std::invalid_argument("einsum_sum: NaN in operand");
        }
        kernel->vals.push_back(std::move(p));
      }
    }
  }

  auto out = std::make_shared<TensorValue>(TensorValue::zeros(kernel->out_shape));
  kernel->forward(*out);

  Tape* tape = nullptr;
  for (const auto& inst : instances) {
    for (const Tensor& t : inst) {
      Tape* tt = tape_of({&t});
      if (tt && tape && tt != tape) {
        throw std::invalid_argument("einsum_sum: operands recorded on different tapes");
      }
      if (tt) tape = tt;
    }
  }
  if (!tape) return Tensor(std::move(out));

  std::vector<int> nodes;
  nodes.reserve(static_cast<size_t>(ninst * nops));
  for (const auto& inst : instances) {
    for (const Tensor& t : inst) nodes.push_back(t.node());
  }
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [kernel, nodes, op](const TensorValue& g, Tape& t) {
    std::vector<real_t*> grads(nodes.size(), nullptr);
    for (size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i] >= 0) grads[i] = t.grad_buffer(nodes[i]).data.data();
    }
    kernel->backward(g, *op, grads);
  });
}

Tensor einsum(Semiring sr, const std::string& spec,
              const std::vector<Tensor>& operands, int block) {
  return einsum_sum(sr, spec, {operands}, block);
}

}  // namespace nsrnn
