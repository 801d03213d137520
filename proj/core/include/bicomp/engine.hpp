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
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bicomp/algorithms.hpp"
#include "bicomp/compressors.hpp"
#include "bicomp/dataio.hpp"
#include "bicomp/problems.hpp"
#include "bicomp/theory.hpp"

namespace bicomp {

// ---------------------------------------------------------------------------
// Configuration (a single JSON document)

struct ProblemConfig {
  enum class Kind { kQuadratic, kLogreg } kind = Kind::kQuadratic;
  // quadratic: explicit matrices or a random generator
  std::optional<QuadraticSpec> quadratic;
  std::optional<RandomQuadraticOptions> random_quadratic;
  // logreg: LIBSVM file or synthetic data
  std::string dataset;
  std::optional<SyntheticLogisticOptions> synthetic;
  std::size_t classes = 0;  // 0: number of distinct labels
  std::optional<double> lambda;
  std::size_t d_features = 0;  // upward override
  bool scale_features = false;
  // reference solution (x*, f*) for distance and Lyapunov metrics
  bool reference = true;
  double reference_tolerance = 0.0;  // 0: 1e-10 quadratic, 1e-8 logreg
};

struct AbcConfig {
  theory::AbcCase abc_case = theory::AbcCase::kFullGradient;
  double epsilon = 0.0;
  std::optional<double> D;
  std::optional<double> sigma2;
  /// f* lower bound used for Delta0; defaults to the reference f* or 0.
  std::optional<double> f_lower;
  /// Lower bound on each f_i*, used for Delta*; defaults to 0.
  double f_i_lower = 0.0;
};

struct AlgorithmConfig {
  Algorithm algo = Algorithm::kGD;
  enum class GammaMode { kValue, kTheory, kAbc } gamma_mode = GammaMode::kTheory;
  double gamma = 0.0;
  double gamma_multiplier = 1.0;
  std::optional<double> beta;  // empty: theory value 1/(omega+1)
  std::optional<std::size_t> batch_size;  // empty: exact gradients
  ShiftInit shift_init = ShiftInit::kZero;
  std::optional<AbcConfig> abc;
};

struct StopRule {
  std::optional<double> grad_norm_sq;
  std::optional<double> f_gap;
};

struct RunConfig {
  ProblemConfig problem;
  std::size_t n_workers = 1;
  PartitionStrategy partition = PartitionStrategy::kContiguous;
  std::uint64_t partition_seed = 0;
  AlgorithmConfig algorithm;
  std::optional<nlohmann::json> dual;    // resolved against the model dim
  std::optional<nlohmann::json> primal;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> rounds;
  StopRule stop;
  std::optional<std::size_t> metric_stride;
  std::vector<std::uint64_t> seeds_for_averaging;
  /// "zeros" (default), explicit vector, or {"gaussian": scale, "seed": s}.
  nlohmann::json x0 = "zeros";
  bool downlink_times_n = false;
  double divergence_factor = 1e3;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// ---------------------------------------------------------------------------

/// A configuration resolved against its problem: oracle, constants, reference,
/// compressors, stepsizes. Immutable and reusable across seeds and sweeps.
class Experiment {
 public:
  explicit Experiment(RunConfig config);

  const RunConfig& config() const { return config_; }
  const Problem& problem() const { return *problem_; }
  const SmoothnessConstants& constants() const { return constants_; }
  const std::optional<OptReference>& reference() const { return reference_; }
  const std::optional<CompressorSpec>& dual() const { return dual_; }
  const std::optional<CompressorSpec>& primal() const { return primal_; }
  const DenseVector& x0() const { return x0_; }

  /// omega of the dual slot (0 when absent) and alpha of the primal slot
  /// (1 when absent).
  double omega() const;
  double alpha() const;
  theory::TheoryInputs theory_inputs() const;

  /// Stepsize from the config (value, theory bound times multiplier, or ABC).
  double gamma() const { return gamma_; }
  double beta() const { return beta_; }
  /// Theory caps that applied when resolving gamma (empty for a plain value).
  const std::vector<double>& theory_caps() const { return theory_caps_; }
  /// Rounds to run: config value, else the ABC horizon.
  std::uint64_t rounds() const { return rounds_; }
  std::size_t metric_stride() const;

  RoundContext context(std::uint64_t seed, WorkerPool* pool) const;

 private:
  RunConfig config_;
  std::shared_ptr<Problem> problem_;
  SmoothnessConstants constants_;
  std::optional<OptReference> reference_;
  std::optional<CompressorSpec> dual_;
  std::optional<CompressorSpec> primal_;
  DenseVector x0_;
  double gamma_ = 0.0;
  double beta_ = 0.0;
  std::vector<double> theory_caps_;
  std::uint64_t rounds_ = 0;
};

struct RoundMetrics {
  std::uint64_t round = 0;
  double f = 0.0;
  std::optional<double> grad_norm_sq;
  std::optional<double> dist_sq;
  std::optional<double> lyapunov;
  std::optional<double> w_drift;
  std::uint64_t uplink_cum = 0;
  std::uint64_t downlink_cum = 0;
};

enum class RunStatus { kCompleted, kStopped, kDiverged };
std::string_view to_string(RunStatus s);

struct RunResult {
  std::vector<RoundMetrics> metrics;
  AlgoState final_state;
  RunStatus status = RunStatus::kCompleted;
  std::string message;
  std::uint64_t rounds_executed = 0;
  double gamma = 0.0;
  double beta = 0.0;
  /// min over t of ||grad f(x^t)||^2 among the evaluated rounds.
  std::optional<double> min_grad_norm_sq;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> gamma;
  std::optional<std::uint64_t> rounds;
  std::optional<std::size_t> metric_stride;
  std::size_t threads = 1;
  /// Evaluate ||grad f(x^t)||^2 every round (not only on emitted rows).
  bool track_min_grad_norm = false;
  /// Called after every round with the state and that round's messages.
  std::function<void(const AlgoState&, const RoundMessages&)> on_round;
};

/// Runs the synchronous round loop. Throws InvariantViolation on replica
/// desynchronisation; divergence is reported through the status.
RunResult run(const Experiment& experiment, const RunOptions& options = {});
RunResult run(const RunConfig& config, const RunOptions& options = {});

// ---------------------------------------------------------------------------

struct SweepCell {
  double gamma = 0.0;
  RunStatus status = RunStatus::kCompleted;
  double final_f = 0.0;
  std::optional<double> min_grad_norm_sq;
  /// Total coordinates (uplink + downlink) when f - f* first fell below
  /// the target, if a target and a reference are available.
  std::optional<std::uint64_t> coords_to_target;
  std::vector<RoundMetrics> metrics;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::optional<std::size_t> best_final_f;
  std::optional<std::size_t> best_coords_to_target;
};

/// {2^i : i in [lo, hi]}
std::vector<double> pow2_grid(int lo, int hi);

SweepResult sweep(const Experiment& experiment, const std::vector<double>& gammas,
                  const RunOptions& options = {},
                  std::optional<double> f_gap_target = std::nullopt);

struct SeriesStats {
  std::vector<double> mean;
  std::vector<double> stderr_;
};

struct MultiSeedResult {
  std::vector<std::uint64_t> rounds;
  SeriesStats f, grad_norm_sq, dist_sq, lyapunov, w_drift;
  std::size_t seeds = 0;
  bool truncated = false;  // runs had different lengths; aligned on prefix
};

MultiSeedResult multi_seed(const Experiment& experiment,
                           const std::vector<std::uint64_t>& seeds,
                           const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Metrics CSV: round,f,grad_norm_sq,dist_sq,lyapunov,w_drift,uplink_cum,downlink_cum

inline constexpr const char* kMetricsHeader =
    "round,f,grad_norm_sq,dist_sq,lyapunov,w_drift,uplink_cum,downlink_cum";

void write_metrics_csv(std::ostream& out, const std::vector<RoundMetrics>& rows);
std::vector<RoundMetrics> read_metrics_csv(std::istream& in);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

nlohmann::json run_summary(const Experiment& experiment, const RunResult& result);

}  // namespace bicomp
