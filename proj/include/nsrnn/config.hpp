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

#ifndef NSRNN_CONFIG_HPP
#define NSRNN_CONFIG_HPP

namespace nsrnn {

#ifdef NSRNN_SINGLE_PRECISION
using real_t = float;
#else
using real_t = double;
#endif

inline constexpr int kCheckpointVersion = 1;
inline constexpr int kDatasetVersion = 1;

// Floor applied inside log(prob) when computing prediction losses.
inline constexpr real_t kLogFloor = static_cast<real_t>(1e-45);

}  // namespace nsrnn

#endif
