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

#include <nlohmann/json.hpp>

#include "bicomp/engine.hpp"

namespace bicomp {
namespace {

const char* kAlgos[] = {"gd", "dcgd", "diana", "ef21p", "ef21p_dcgd", "ef21p_diana"};

// 100 rounds of each algorithm on a synthetic logistic problem, d = 200.
void BM_Rounds(benchmark::State& state) {
  const std::string algo = kAlgos[state.range(0)];
  nlohmann::json j = {
      {"problem",
       {{"kind", "logreg"},
        {"synthetic", {{"samples", 500}, {"features", 100}, {"classes", 2}, {"seed", 5}}}}},
      {"n_workers", 10},
      {"algorithm", {{"algo", algo}, {"gamma", 0.05}}},
      {"dual", {{"kind", "randk"}, {"k", 2}}},
      {"primal", {{"kind", "topk"}, {"k", 2}}},
      {"rounds", 100},
      {"metric_stride", 100},
  };
  if (algo == "gd" || algo == "ef21p") j.erase("dual");
  if (algo.rfind("ef21p", 0) != 0) j.erase("primal");
  const Experiment exp{parse_run_config(j)};
  RunOptions o;
  o.threads = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(run(exp, o));
  state.SetLabel(algo);
}
BENCHMARK(BM_Rounds)->ArgsProduct({{0, 1, 2, 3, 4, 5}, {1, 4}})->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace bicomp
