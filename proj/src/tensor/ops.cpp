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

#include "nsrnn/tensor/ops.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace nsrnn {

namespace {

constexpr real_t kNegInf = -std::numeric_limits<real_t>::infinity();

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!same_shape(a.shape(), b.shape())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
}

void check_bcast_last(const Tensor& a, const Tensor& s, const char* op) {
  if (a.shape().empty()) {
    throw std::invalid_argument(std::string(op) + ": rank-0 left operand");
  }
  Shape expect(a.shape().begin(), a.shape().end() - 1);
  if (!same_shape(expect, s.shape())) {
    throw std::invalid_argument(std::string(op) + ": broadcast shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(s.shape()));
  }
}

std::shared_ptr<TensorValue> alloc_like(const Shape& s) {
  return std::make_shared<TensorValue>(TensorValue::zeros(s));
}

real_t stable_sigmoid(real_t x) {
  if (x >= 0) return real_t(1) / (real_t(1) + std::exp(-x));
  real_t e = std::exp(x);
  return e / (real_t(1) + e);
}

real_t logaddexp2(real_t a, real_t b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  real_t m = a > b ? a : b;
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

struct AxisSplit {
  int64_t outer, mid, inner;
};

AxisSplit split_axis(const Shape& shape, int axis, const char* op) {
  int rank = static_cast<int>(shape.size());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw std::invalid_argument(std::string(op) + ": axis out of range");
  }
  AxisSplit s{1, shape[axis], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  for (int i = axis + 1; i < rank; ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, int axis) {
  int rank = static_cast<int>(shape.size());
  if (axis < 0) axis += rank;
  Shape out;
  for (int i = 0; i < rank; ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] + bv[i];
  Tape* tape = tape_of({&a, &b});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), nb = b.node();
  return tape->record(std::move(out), [na, nb](const TensorValue& g, Tape& t) {
    if (na >= 0) {
      auto& ga = t.grad_buffer(na);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    }
    if (nb >= 0) {
      auto& gb = t.grad_buffer(nb);
      for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] - bv[i];
  Tape* tape = tape_of({&a, &b});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), nb = b.node();
  return tape->record(std::move(out), [na, nb](const TensorValue& g, Tape& t) {
    if (na >= 0) {
      auto& ga = t.grad_buffer(na);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    }
    if (nb >= 0) {
      auto& gb = t.grad_buffer(nb);
      for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] * bv[i];
  Tape* tape = tape_of({&a, &b});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), nb = b.node();
  auto ap = a.ptr();
  auto bp = b.ptr();
  return tape->record(std::move(out), [na, nb, ap, bp](const TensorValue& g, Tape& t) {
    if (na >= 0) {
      auto& ga = t.grad_buffer(na);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * bp->data[i];
    }
    if (nb >= 0) {
      auto& gb = t.grad_buffer(nb);
      for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * ap->data[i];
    }
  });
}

Tensor logaddexp(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "logaddexp");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = logaddexp2(av[i], bv[i]);
  Tape* tape = tape_of({&a, &b});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), nb = b.node();
  auto ap = a.ptr();
  auto bp = b.ptr();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, nb, ap, bp, op](const TensorValue& g, Tape& t) {
    if (na >= 0) {
      auto& ga = t.grad_buffer(na);
      for (size_t i = 0; i < g.data.size(); ++i) {
        if (ap->data[i] == kNegInf) continue;
        ga.data[i] += g.data[i] * std::exp(ap->data[i] - op->data[i]);
      }
    }
    if (nb >= 0) {
      auto& gb = t.grad_buffer(nb);
      for (size_t i = 0; i < g.data.size(); ++i) {
        if (bp->data[i] == kNegInf) continue;
        gb.data[i] += g.data[i] * std::exp(bp->data[i] - op->data[i]);
      }
    }
  });
}

// Ties route the gradient to the first operand.
Tensor minimum(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "minimum");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] <= bv[i] ? av[i] : bv[i];
  Tape* tape = tape_of({&a, &b});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), nb = b.node();
  auto ap = a.ptr();
  auto bp = b.ptr();
  return tape->record(std::move(out), [na, nb, ap, bp](const TensorValue& g, Tape& t) {
    for (size_t i = 0; i < g.data.size(); ++i) {
      bool first = ap->data[i] <= bp->data[i];
      int n = first ? na : nb;
      if (n >= 0) t.grad_buffer(n).data[i] += g.data[i];
    }
  });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "maximum");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& bv = b.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] >= bv[i] ? av[i] : bv[i];
  Tape* tape = tape_of({&a, &b});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), nb = b.node();
  auto ap = a.ptr();
  auto bp = b.ptr();
  return tape->record(std::move(out), [na, nb, ap, bp](const TensorValue& g, Tape& t) {
    for (size_t i = 0; i < g.data.size(); ++i) {
      bool first = ap->data[i] >= bp->data[i];
      int n = first ? na : nb;
      if (n >= 0) t.grad_buffer(n).data[i] += g.data[i];
    }
  });
}

Tensor scale(const Tensor& a, real_t c) {
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] * c;
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  return tape->record(std::move(out), [na, c](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * c;
  });
}

Tensor sigmoid(const Tensor& a) {
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = stable_sigmoid(av[i]);
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, op](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (size_t i = 0; i < g.data.size(); ++i) {
      real_t y = op->data[i];
      ga.data[i] += g.data[i] * y * (real_t(1) - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = std::tanh(av[i]);
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, op](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (size_t i = 0; i < g.data.size(); ++i) {
      real_t y = op->data[i];
      ga.data[i] += g.data[i] * (real_t(1) - y * y);
    }
  });
}

Tensor exp(const Tensor& a) {
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = std::exp(av[i]);
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, op](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * op->data[i];
  });
}

Tensor relu(const Tensor& a) {
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  for (size_t i = 0; i < av.size(); ++i) out->data[i] = av[i] > 0 ? av[i] : real_t(0);
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  auto ap = a.ptr();
  return tape->record(std::move(out), [na, ap](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (size_t i = 0; i < g.data.size(); ++i) {
      if (ap->data[i] > 0) ga.data[i] += g.data[i];
    }
  });
}

Tensor mul_bcast_last(const Tensor& a, const Tensor& s) {
  check_bcast_last(a, s, "mul_bcast_last");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& sv = s.value().data;
  int64_t cols = a.shape().back();
  int64_t rows = a.numel() / std::max<int64_t>(cols, 1);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < cols; ++j) {
      out->data[static_cast<size_t>(r * cols + j)] =
          av[static_cast<size_t>(r * cols + j)] * sv[static_cast<size_t>(r)];
    }
  }
  Tape* tape = tape_of({&a, &s});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), ns = s.node();
  auto ap = a.ptr();
  auto sp = s.ptr();
  return tape->record(std::move(out), [na, ns, ap, sp, rows, cols](const TensorValue& g, Tape& t) {
    if (na >= 0) {
      auto& ga = t.grad_buffer(na);
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < cols; ++j) {
          ga.data[static_cast<size_t>(r * cols + j)] +=
              g.data[static_cast<size_t>(r * cols + j)] * sp->data[static_cast<size_t>(r)];
        }
      }
    }
    if (ns >= 0) {
      auto& gs = t.grad_buffer(ns);
      for (int64_t r = 0; r < rows; ++r) {
        real_t acc = 0;
        for (int64_t j = 0; j < cols; ++j) {
          acc += g.data[static_cast<size_t>(r * cols + j)] *
                 ap->data[static_cast<size_t>(r * cols + j)];
        }
        gs.data[static_cast<size_t>(r)] += acc;
      }
    }
  });
}

Tensor sub_bcast_last(const Tensor& a, const Tensor& s) {
  check_bcast_last(a, s, "sub_bcast_last");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& sv = s.value().data;
  int64_t cols = a.shape().back();
  int64_t rows = a.numel() / std::max<int64_t>(cols, 1);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < cols; ++j) {
      out->data[static_cast<size_t>(r * cols + j)] =
          av[static_cast<size_t>(r * cols + j)] - sv[static_cast<size_t>(r)];
    }
  }
  Tape* tape = tape_of({&a, &s});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), ns = s.node();
  return tape->record(std::move(out), [na, ns, rows, cols](const TensorValue& g, Tape& t) {
    if (na >= 0) {
      auto& ga = t.grad_buffer(na);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
    }
    if (ns >= 0) {
      auto& gs = t.grad_buffer(ns);
      for (int64_t r = 0; r < rows; ++r) {
        real_t acc = 0;
        for (int64_t j = 0; j < cols; ++j) acc += g.data[static_cast<size_t>(r * cols + j)];
        gs.data[static_cast<size_t>(r)] -= acc;
      }
    }
  });
}

Tensor div_bcast_last(const Tensor& a, const Tensor& s) {
  check_bcast_last(a, s, "div_bcast_last");
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  const auto& sv = s.value().data;
  int64_t cols = a.shape().back();
  int64_t rows = a.numel() / std::max<int64_t>(cols, 1);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < cols; ++j) {
      out->data[static_cast<size_t>(r * cols + j)] =
          av[static_cast<size_t>(r * cols + j)] / sv[static_cast<size_t>(r)];
    }
  }
  Tape* tape = tape_of({&a, &s});
  if (!tape) return Tensor(std::move(out));
  int na = a.node(), ns = s.node();
  auto sp = s.ptr();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, ns, sp, op, rows, cols](const TensorValue& g, Tape& t) {
    if (na >= 0) {
      auto& ga = t.grad_buffer(na);
      for (int64_t r = 0; r < rows; ++r) {
        for (int64_t j = 0; j < cols; ++j) {
          ga.data[static_cast<size_t>(r * cols + j)] +=
              g.data[static_cast<size_t>(r * cols + j)] / sp->data[static_cast<size_t>(r)];
        }
      }
    }
    if (ns >= 0) {
      auto& gs = t.grad_buffer(ns);
      for (int64_t r = 0; r < rows; ++r) {
        real_t acc = 0;
        for (int64_t j = 0; j < cols; ++j) {
          acc += g.data[static_cast<size_t>(r * cols + j)] *
                 op->data[static_cast<size_t>(r * cols + j)];
        }
        gs.data[static_cast<size_t>(r)] -= acc / sp->data[static_cast<size_t>(r)];
      }
    }
  });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no operands");
  Shape head(parts[0].shape().begin(), parts[0].shape().end() - 1);
  int64_t total = 0;
  for (const Tensor& p : parts) {
    if (p.shape().empty()) throw std::invalid_argument("concat_last: rank-0 operand");
    Shape h(p.shape().begin(), p.shape().end() - 1);
    if (!same_shape(h, head)) throw std::invalid_argument("concat_last: shape mismatch");
    total += p.shape().back();
  }
  Shape out_shape = head;
  out_shape.push_back(total);
  auto out = alloc_like(out_shape);
  int64_t rows = shape_numel(head);
  int64_t off = 0;
  for (const Tensor& p : parts) {
    int64_t cols = p.shape().back();
    const auto& pv = p.value().data;
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < cols; ++j) {
        out->data[static_cast<size_t>(r * total + off + j)] = pv[static_cast<size_t>(r * cols + j)];
      }
    }
    off += cols;
  }
  std::vector<const Tensor*> refs;
  refs.reserve(parts.size());
  Tape* tape = nullptr;
  for (const Tensor& p : parts) {
    Tape* pt = tape_of({&p});
    if (pt && tape && pt != tape) throw std::invalid_argument("concat_last: mixed tapes");
    if (pt) tape = pt;
  }
  if (!tape) return Tensor(std::move(out));
  std::vector<int> nodes;
  std::vector<int64_t> widths;
  for (const Tensor& p : parts) {
    nodes.push_back(p.node());
    widths.push_back(p.shape().back());
  }
  return tape->record(std::move(out), [nodes, widths, rows, total](const TensorValue& g, Tape& t) {
    int64_t off = 0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      int64_t cols = widths[k];
      if (nodes[k] >= 0) {
        auto& gp = t.grad_buffer(nodes[k]);
        for (int64_t r = 0; r < rows; ++r) {
          for (int64_t j = 0; j < cols; ++j) {
            gp.data[static_cast<size_t>(r * cols + j)] +=
                g.data[static_cast<size_t>(r * total + off + j)];
          }
        }
      }
      off += cols;
    }
  });
}

Tensor slice_last(const Tensor& a, int64_t lo, int64_t hi) {
  if (a.shape().empty()) throw std::invalid_argument("slice_last: rank-0 operand");
  int64_t cols = a.shape().back();
  if (lo < 0 || hi > cols || lo >= hi) throw std::invalid_argument("slice_last: bad range");
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  int64_t width = hi - lo;
  out_shape.push_back(width);
  auto out = alloc_like(out_shape);
  int64_t rows = a.numel() / cols;
  const auto& av = a.value().data;
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t j = 0; j < width; ++j) {
      out->data[static_cast<size_t>(r * width + j)] = av[static_cast<size_t>(r * cols + lo + j)];
    }
  }
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  return tape->record(std::move(out), [na, rows, cols, lo, width](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t j = 0; j < width; ++j) {
        ga.data[static_cast<size_t>(r * cols + lo + j)] += g.data[static_cast<size_t>(r * width + j)];
      }
    }
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw std::invalid_argument("reshape: element count mismatch");
  }
  auto out = std::make_shared<TensorValue>(TensorValue(shape, a.value().data));
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  return tape->record(std::move(out), [na](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
  });
}

Tensor softmax_last(const Tensor& a) {
  if (a.shape().empty()) throw std::invalid_argument("softmax_last: rank-0 operand");
  int64_t cols = a.shape().back();
  int64_t rows = a.numel() / cols;
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  for (int64_t r = 0; r < rows; ++r) {
    const real_t* x = av.data() + r * cols;
    real_t* y = out->data.data() + r * cols;
    real_t m = x[0];
    for (int64_t j = 1; j < cols; ++j) m = std::max(m, x[j]);
    real_t z = 0;
    for (int64_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - m);
      z += y[j];
    }
    for (int64_t j = 0; j < cols; ++j) y[j] /= z;
  }
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, op, rows, cols](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (int64_t r = 0; r < rows; ++r) {
      const real_t* y = op->data.data() + r * cols;
      const real_t* gr = g.data.data() + r * cols;
      real_t dot = 0;
      for (int64_t j = 0; j < cols; ++j) dot += gr[j] * y[j];
      for (int64_t j = 0; j < cols; ++j) {
        ga.data[static_cast<size_t>(r * cols + j)] += y[j] * (gr[j] - dot);
      }
    }
  });
}

Tensor log_softmax_last(const Tensor& a) {
  if (a.shape().empty()) throw std::invalid_argument("log_softmax_last: rank-0 operand");
  int64_t cols = a.shape().back();
  int64_t rows = a.numel() / cols;
  auto out = alloc_like(a.shape());
  const auto& av = a.value().data;
  for (int64_t r = 0; r < rows; ++r) {
    const real_t* x = av.data() + r * cols;
    real_t* y = out->data.data() + r * cols;
    real_t m = x[0];
    for (int64_t j = 1; j < cols; ++j) m = std::max(m, x[j]);
    real_t z = 0;
    for (int64_t j = 0; j < cols; ++j) z += std::exp(x[j] - m);
    real_t lse = m + std::log(z);
    for (int64_t j = 0; j < cols; ++j) y[j] = x[j] - lse;
  }
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, op, rows, cols](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (int64_t r = 0; r < rows; ++r) {
      const real_t* y = op->data.data() + r * cols;
      const real_t* gr = g.data.data() + r * cols;
      real_t gsum = 0;
      for (int64_t j = 0; j < cols; ++j) gsum += gr[j];
      for (int64_t j = 0; j < cols; ++j) {
        ga.data[static_cast<size_t>(r * cols + j)] += gr[j] - std::exp(y[j]) * gsum;
      }
    }
  });
}

Tensor logsumexp_axis(const Tensor& a, int axis) {
  AxisSplit sp = split_axis(a.shape(), axis, "logsumexp_axis");
  Shape out_shape = drop_axis(a.shape(), axis);
  auto out = alloc_like(out_shape);
  const auto& av = a.value().data;
  for (int64_t o = 0; o < sp.outer; ++o) {
    for (int64_t i = 0; i < sp.inner; ++i) {
      real_t m = kNegInf;
      for (int64_t k = 0; k < sp.mid; ++k) {
        m = std::max(m, av[static_cast<size_t>((o * sp.mid + k) * sp.inner + i)]);
      }
      real_t r;
      if (m == kNegInf) {
        r = kNegInf;
      } else {
        real_t z = 0;
        for (int64_t k = 0; k < sp.mid; ++k) {
          z += std::exp(av[static_cast<size_t>((o * sp.mid + k) * sp.inner + i)] - m);
        }
        r = m + std::log(z);
      }
      out->data[static_cast<size_t>(o * sp.inner + i)] = r;
    }
  }
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  auto ap = a.ptr();
  std::shared_ptr<const TensorValue> op = out;
  return tape->record(std::move(out), [na, ap, op, sp](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (int64_t o = 0; o < sp.outer; ++o) {
      for (int64_t i = 0; i < sp.inner; ++i) {
        real_t lse = op->data[static_cast<size_t>(o * sp.inner + i)];
        if (lse == kNegInf) continue;
        real_t gr = g.data[static_cast<size_t>(o * sp.inner + i)];
        for (int64_t k = 0; k < sp.mid; ++k) {
          size_t idx = static_cast<size_t>((o * sp.mid + k) * sp.inner + i);
          if (ap->data[idx] == kNegInf) continue;
          ga.data[idx] += gr * std::exp(ap->data[idx] - lse);
        }
      }
    }
  });
}

Tensor sum_axis(const Tensor& a, int axis) {
  AxisSplit sp = split_axis(a.shape(), axis, "sum_axis");
  Shape out_shape = drop_axis(a.shape(), axis);
  auto out = alloc_like(out_shape);
  const auto& av = a.value().data;
  for (int64_t o = 0; o < sp.outer; ++o) {
    for (int64_t i = 0; i < sp.inner; ++i) {
      real_t acc = 0;
      for (int64_t k = 0; k < sp.mid; ++k) {
        acc += av[static_cast<size_t>((o * sp.mid + k) * sp.inner + i)];
      }
      out->data[static_cast<size_t>(o * sp.inner + i)] = acc;
    }
  }
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  return tape->record(std::move(out), [na, sp](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (int64_t o = 0; o < sp.outer; ++o) {
      for (int64_t i = 0; i < sp.inner; ++i) {
        real_t gr = g.data[static_cast<size_t>(o * sp.inner + i)];
        for (int64_t k = 0; k < sp.mid; ++k) {
          ga.data[static_cast<size_t>((o * sp.mid + k) * sp.inner + i)] += gr;
        }
      }
    }
  });
}

Tensor sum_all(const Tensor& a) {
  real_t acc = 0;
  for (real_t v : a.value().data) acc += v;
  auto out = std::make_shared<TensorValue>(TensorValue::scalar(acc));
  Tape* tape = tape_of({&a});
  if (!tape) return Tensor(std::move(out));
  int na = a.node();
  return tape->record(std::move(out), [na](const TensorValue& g, Tape& t) {
    if (na < 0) return;
    auto& ga = t.grad_buffer(na);
    for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[0];
  });
}

Tensor linear(const Tensor& x, const Tensor& w) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.shape()[1] != w.shape()[1]) {
    throw std::invalid_argument("linear: expected x[B,n], w[m,n]");
  }
  int64_t bsz = x.shape()[0], n = x.shape()[1], m = w.shape()[0];
  auto out = alloc_like(Shape{bsz, m});
  const real_t* xd = x.value().data.data();
  const real_t* wd = w.value().data.data();
  for (int64_t b = 0; b < bsz; ++b) {
    for (int64_t mi = 0; mi < m; ++mi) {
      real_t acc = 0;
      const real_t* xr = xd + b * n;
      const real_t* wr = wd + mi * n;
      for (int64_t j = 0; j < n; ++j) acc += xr[j] * wr[j];
      out->data[static_cast<size_t>(b * m + mi)] = acc;
    }
  }
  Tape* tape = tape_of({&x, &w});
  if (!tape) return Tensor(std::move(out));
  int nx = x.node(), nw = w.node();
  auto xp = x.ptr();
  auto wp = w.ptr();
  return tape->record(std::move(out), [nx, nw, xp, wp, bsz, n, m](const TensorValue& g, Tape& t) {
    if (nx >= 0) {
      auto& gx = t.grad_buffer(nx);
      for (int64_t b = 0; b < bsz; ++b) {
        for (int64_t mi = 0; mi < m; ++mi) {
          real_t gv = g.data[static_cast<size_t>(b * m + mi)];
          const real_t* wr = wp->data.data() + mi * n;
          real_t* gxr = gx.data.data() + b * n;
          for (int64_t j = 0; j < n; ++j) gxr[j] += gv * wr[j];
        }
      }
    }
    if (nw >= 0) {
      auto& gw = t.grad_buffer(nw);
      for (int64_t b = 0; b < bsz; ++b) {
        const real_t* xr = xp->data.data() + b * n;
        for (int64_t mi = 0; mi < m; ++mi) {
          real_t gv = g.data[static_cast<size_t>(b * m + mi)];
          real_t* gwr = gw.data.data() + mi * n;
          for (int64_t j = 0; j < n; ++j) gwr[j] += gv * xr[j];
        }
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = linear(x, w);
  if (b.shape().size() != 1 || b.shape()[0] != y.shape()[1]) {
    throw std::invalid_argument("linear: bias shape mismatch");
  }
  // Broadcast-add the bias across the batch.
  int64_t bsz = y.shape()[0], m = y.shape()[1];
  auto out = alloc_like(y.shape());
  const auto& yv = y.value().data;
  const auto& bv = b.value().data;
  for (int64_t r = 0; r < bsz; ++r) {
    for (int64_t j = 0; j < m; ++j) {
      out->data[static_cast<size_t>(r * m + j)] =
          yv[static_cast<size_t>(r * m + j)] + bv[static_cast<size_t>(j)];
    }
  }
  Tape* tape = tape_of({&y, &b});
  if (!tape) return Tensor(std::move(out));
  int ny = y.node(), nb = b.node();
  return tape->record(std::move(out), [ny, nb, bsz, m](const TensorValue& g, Tape& t) {
    if (ny >= 0) {
      auto& gy = t.grad_buffer(ny);
      for (size_t i = 0; i < g.data.size(); ++i) gy.data[i] += g.data[i];
    }
    if (nb >= 0) {
      auto& gb = t.grad_buffer(nb);
      for (int64_t r = 0; r < bsz; ++r) {
        for (int64_t j = 0; j < m; ++j) {
          gb.data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(r * m + j)];
        }
      }
    }
  });
}

Tensor nll_loss(const Tensor& probs, const std::vector<int>& targets, real_t floor) {
  if (probs.shape().size() != 2) throw std::invalid_argument("nll_loss: expected [B,V]");
  int64_t bsz = probs.shape()[0], v = probs.shape()[1];
  if (static_cast<int64_t>(targets.size()) != bsz) {
    throw std::invalid_argument("nll_loss: target count mismatch");
  }
  auto out = alloc_like(Shape{bsz});
  const auto& pv = probs.value().data;
  for (int64_t b = 0; b < bsz; ++b) {
    int tgt = targets[static_cast<size_t>(b)];
    if (tgt < 0 || tgt >= v) throw std::invalid_argument("nll_loss: target out of range");
    real_t p = pv[static_cast<size_t>(b * v + tgt)];
    out->data[static_cast<size_t>(b)] = -std::log(std::max(p, floor));
  }
  Tape* tape = tape_of({&probs});
  if (!tape) return Tensor(std::move(out));
  int np = probs.node();
  auto pp = probs.ptr();
  std::vector<int> tg = targets;
  return tape->record(std::move(out), [np, pp, tg, v, floor](const TensorValue& g, Tape& t) {
    if (np < 0) return;
    auto& gp = t.grad_buffer(np);
    for (size_t b = 0; b < tg.size(); ++b) {
      real_t p = pp->data[b * static_cast<size_t>(v) + static_cast<size_t>(tg[b])];
      if (p > floor) {
        gp.data[b * static_cast<size_t>(v) + static_cast<size_t>(tg[b])] -= g.data[b] / p;
      }
    }
  });
}

}  // namespace nsrnn
