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

#include <benchmark/benchmark.h>

#include "bicomp/compressors.hpp"
#include "bicomp/rng.hpp"

namespace bicomp {
namespace {

DenseVector gaussian(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  DenseVector x(d);
  for (double& v : x) v = rng.normal();
  return x;
}

void BM_TopK(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(d, 1);
  const auto spec = CompressorSpec::top_k(d / 100 + 1, d);
  Rng rng(0);
  for (auto _ : state) benchmark::DoNotOptimize(compress(spec, x, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
}
BENCHMARK(BM_TopK)->RangeMultiplier(10)->Range(100, 100000);

void BM_RandK(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto x = gaussian(d, 2);
  const auto spec = CompressorSpec::rand_k(d / 100 + 1, d);
  Rng rng(0);
  for (auto _ : state) benchmark::DoNotOptimize(compress(spec, x, rng));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d));
}
BENCHMARK(BM_RandK)->RangeMultiplier(10)->Range(100, 100000);

}  // namespace
}  // namespace bicomp
