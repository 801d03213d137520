// Copyright 2026 The bicomp Authors. All Rights Reserved.
//
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
// =============================================================================

#pragma once

#include <cstdint>
#include <random>

namespace bicomp {

enum class StreamRole : std::uint64_t {
  kDual = 1,
  kPrimal = 2,
  kSample = 3,
  kData = 4,
  kCheck = 5,
};

/// Identifies one random draw site: every compressor application and every
/// minibatch draw gets its own key, so replaying a round (or running workers
/// on different threads) reproduces the same numbers.
struct StreamKey {
  std::uint64_t seed = 0;
  StreamRole role = StreamRole::kDual;
  std::uint64_t endpoint = 0;
  std::uint64_t round = 0;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(const StreamKey& key);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  explicit Rng(const StreamKey& key) : engine_(derive_seed(key)) {}

  /// Uniform integer in [0, n); unbiased (rejection), platform independent.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform01();
  double normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bicomp
