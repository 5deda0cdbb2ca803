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

#ifndef NSRNN_TENSOR_EINSUM_HPP_
#define NSRNN_TENSOR_EINSUM_HPP_

#include <string>
#include <vector>

#include "nsrnn/tensor/tape.hpp"

namespace nsrnn {

// Semiring the contraction runs in.  Real multiplies entries and adds
// terms; Log adds entries and combines terms with a numerically stable
// log-sum-exp, so tensors hold log-space weights and zero is -inf.
enum class Semiring { Real, Log };

// Generalized tensor contraction over a semiring.
//
// The spec uses one lowercase letter per axis, e.g. "qxsz,szry->qxry".
// An index letter may not repeat within a single operand.  Letters that
// appear in the inputs but not the output are summed out.  Letters in
// the output must appear in at least one input.
//
// In the Log semiring, terms are accumulated in blocks of `block`
// (max-shifted within a block, then merged into a running max/sum
// pair), so `block` changes rounding but not the result beyond
// floating-point noise.
Tensor einsum(Semiring sr, const std::string& spec,
              const std::vector<Tensor>& operands, int block = 256);

// Same contraction applied to a list of operand tuples, with the
// results summed (Real) or log-added (Log) elementwise.  Equivalent to
// stacking the tuples along a fresh summed-out axis, but without
// materializing the stack, and the backward pass scatters straight
// into each tuple's operands.  The list must be non-empty and every
// tuple must have the shapes of the first.
Tensor einsum_sum(Semiring sr, const std::string& spec,
                  const std::vector<std::vector<Tensor>>& instances,
                  int block = 256);

}  // namespace nsrnn

#endif  // NSRNN_TENSOR_EINSUM_HPP_
