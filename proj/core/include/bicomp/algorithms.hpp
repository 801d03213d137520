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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bicomp/compressors.hpp"
#include "bicomp/problems.hpp"
#include "bicomp/thread_pool.hpp"
#include "bicomp/vector.hpp"

namespace bicomp {

enum class Algorithm { kGD, kEF21P, kDCGD, kDIANA, kEF21P_DCGD, kEF21P_DIANA };

Algorithm algorithm_from_string(std::string_view name);
std::string_view to_string(Algorithm algo);
bool uses_dual_compressor(Algorithm algo);
bool uses_primal_compressor(Algorithm algo);
bool uses_gradient_shifts(Algorithm algo);

enum class ShiftInit { kZero, kGradient };

/// Replicated state of one run. Server: x, w_server, h_server. Worker i:
/// w_workers[i], h_workers[i]. Algorithms without a model shift keep w equal
/// to x; algorithms without gradient shifts keep h at zero.
struct AlgoState {
  DenseVector x;
  DenseVector w_server;
  std::vector<DenseVector> w_workers;
  std::vector<DenseVector> h_workers;
  DenseVector h_server;
  std::uint64_t t = 0;
  double gamma = 0.0;
  double beta = 0.0;
};

/// x^0 = w^0 on every replica; h_i^0 = 0 or grad f_i(x^0), h^0 = mean h_i^0.
AlgoState init_state(const Problem& problem, std::span<const double> x0,
                     double gamma, double beta, ShiftInit shift_init);

/// Source of the worker gradients: exact, or minibatch estimates with their
/// own per-(worker, round) streams.
class GradientSource {
 public:
  static GradientSource exact() { return GradientSource(); }
  static GradientSource stochastic(std::size_t batch_size, std::uint64_t seed);

  bool is_exact() const { return !batch_size_.has_value(); }
  std::optional<std::size_t> batch_size() const { return batch_size_; }

  void worker_grad(const Problem& problem, std::size_t worker,
                   std::span<const double> x, std::uint64_t round,
                   std::span<double> out) const;

 private:
  std::optional<std::size_t> batch_size_;
  std::uint64_t seed_ = 0;
};

/// Everything a round needs besides the state. Compressor streams are built
/// from `seed`: dual stream of worker i keyed (seed, dual, i, t), primal
/// stream keyed (seed, primal, 0, t).
struct RoundContext {
  const Problem* problem = nullptr;
  GradientSource gradients = GradientSource::exact();
  std::optional<CompressorSpec> dual;
  std::optional<CompressorSpec> primal;
  std::uint64_t seed = 0;
  bool downlink_times_n = false;
  WorkerPool* pool = nullptr;
};

/// Replaces exact worker gradients by minibatch estimates; the message and
/// state algebra of every round is unchanged.
RoundContext attach_stochastic(RoundContext ctx, std::size_t batch_size,
                               std::uint64_t seed);

struct RoundMessages {
  std::vector<SparseVector> uplink;
  /// Broadcast. For value-preserving primal compressors it carries the new
  /// model-shift coordinates (assigned by replicas); otherwise increments.
  SparseVector downlink;
  bool downlink_assigns = false;
  std::size_t uplink_coords = 0;
  std::size_t downlink_coords = 0;
  /// ||x^{t+1} - w^t||^2 before primal compression (0 without a model shift).
  double shift_gap_sq = 0.0;
  /// ||zeta^{t+1}||^2 = ||w^{t+1} - x^{t+1}||^2, the primal perturbation.
  double perturbation_sq = 0.0;
};

RoundMessages gd_round(AlgoState& state, const RoundContext& ctx);
RoundMessages ef21p_round(AlgoState& state, const RoundContext& ctx);
RoundMessages dcgd_round(AlgoState& state, const RoundContext& ctx);
RoundMessages diana_round(AlgoState& state, const RoundContext& ctx);
RoundMessages ef21p_dcgd_round(AlgoState& state, const RoundContext& ctx);
RoundMessages ef21p_diana_round(AlgoState& state, const RoundContext& ctx);

RoundMessages run_round(Algorithm algo, AlgoState& state, const RoundContext& ctx);

/// Throws ConfigError when a compressor is missing, has the wrong dimension,
/// or is in the wrong class for its slot (dual slots need U(omega), primal
/// slots need B(alpha)).
void validate_compressors(Algorithm algo, const RoundContext& ctx);

/// max_i ||w_workers[i] - w_server||_inf.
double replication_gap(const AlgoState& state);
/// ||h_server - mean_i h_workers[i]||_inf.
double shift_mean_gap(const AlgoState& state);

}  // namespace bicomp
