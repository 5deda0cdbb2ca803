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

#ifndef NSRNN_TENSOR_OPS_HPP
#define NSRNN_TENSOR_OPS_HPP

#include <vector>

#include "nsrnn/tensor/tape.hpp"

namespace nsrnn {

// Elementwise, same shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor logaddexp(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, real_t c);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);

// Broadcast over the last axis: s has a's shape minus its last axis.
Tensor mul_bcast_last(const Tensor& a, const Tensor& s);
Tensor sub_bcast_last(const Tensor& a, const Tensor& s);
Tensor div_bcast_last(const Tensor& a, const Tensor& s);

Tensor concat_last(const std::vector<Tensor>& parts);
Tensor slice_last(const Tensor& a, int64_t lo, int64_t hi);
Tensor reshape(const Tensor& a, Shape shape);

Tensor softmax_last(const Tensor& a);
Tensor log_softmax_last(const Tensor& a);

// Reductions. `axis` may be negative (counted from the end); the reduced
// axis is removed from the shape. logsumexp of an all-(-inf) slice is -inf
// and contributes zero gradient.
Tensor logsumexp_axis(const Tensor& a, int axis);
Tensor sum_axis(const Tensor& a, int axis);
Tensor sum_all(const Tensor& a);

// x: [B,n], w: [m,n], b: [m] -> [B,m].
Tensor linear(const Tensor& x, const Tensor& w);
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// probs: [B,V]; returns [B] with -log(max(probs[b, target[b]], floor)).
Tensor nll_loss(const Tensor& probs, const std::vector<int>& targets, real_t floor);

}  // namespace nsrnn

#endif
