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

#ifndef NSRNN_TENSOR_RNG_HPP_
#define NSRNN_TENSOR_RNG_HPP_

#include <cstdint>
#include <random>
#include <string>

#include "nsrnn/config.hpp"

namespace nsrnn {

// Deterministic random source.  All sampling goes through the raw
// 64-bit stream so results are identical across standard libraries;
// std::uniform_*_distribution is implementation-defined and never used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53 random bits.
  real_t uniform() {
    return static_cast<real_t>(next_u64() >> 11) * real_t(1.1102230246251565e-16);
  }

  real_t uniform(real_t lo, real_t hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased via rejection.
  int64_t uniform_int(int64_t n) {
    uint64_t un = static_cast<uint64_t>(n);
    uint64_t lim = UINT64_MAX - UINT64_MAX % un;
    uint64_t r;
    do {
      r = next_u64();
    } while (r >= lim);
    return static_cast<int64_t>(r % un);
  }

 private:
  std::mt19937_64 eng_;
};

// splitmix64 finalizer, used to derive independent seeds.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + uint64_t(0x9e3779b97f4a7c15) * (b + 1);
  z = (z ^ (z >> 30)) * uint64_t(0xbf58476d1ce4e5b9);
  z = (z ^ (z >> 27)) * uint64_t(0x94d049bb133111eb);
  return z ^ (z >> 31);
}

// FNV-1a, for seeds derived from task names.
inline uint64_t hash_seed(const std::string& s) {
  uint64_t h = uint64_t(0xcbf29ce484222325);
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= uint64_t(0x100000001b3);
  }
  return h;
}

}  // namespace nsrnn

#endif  // NSRNN_TENSOR_RNG_HPP_
