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

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bicomp/problems.hpp"
#include "bicomp/vector.hpp"

namespace bicomp::theory {

/// Any bound whose denominator has a zero factor is +infinity and never wins
/// a min; `kInf` is that value.
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct TheoryInputs {
  double n = 1.0;
  double omega = 0.0;
  double alpha = 1.0;
  double L = 0.0;
  double L_max = 0.0;
  double L_hat = 0.0;
  double mu = 0.0;
  double sigma2 = 0.0;
  double delta0 = 0.0;      // f(x^0) - f*
  double delta_star = 0.0;  // f* - (1/n) sum_i f_i*
  std::optional<double> D;  // strong-growth constant
  double epsilon = 0.0;
};

/// Throws ConfigError on negative inputs, alpha outside (0, 1] or mu > L.
void validate(const TheoryInputs& in);

/// min over `terms`, treating NaN as +inf.
double min_term(std::span<const double> terms);

struct StepsizeBound {
  double gamma = 0.0;
  double beta = 0.0;  // shift stepsize companion (DIANA family), else 0
  std::vector<double> terms;
};

/// EF21-P + DIANA, strongly convex:
///   gamma <= min{ n/(160 omega L_max), sqrt(n alpha)/(20 sqrt(omega) L_hat),
///                 alpha/(100 L), 1/((omega+1) mu) },  beta = 1/(omega+1).
StepsizeBound stepsize_diana_strong(const TheoryInputs& in);

/// EF21-P + DCGD (strongly convex or convex) and EF21-P + DIANA (general
/// convex): the same bound without the mu term.
StepsizeBound stepsize_dcgd_strong(const TheoryInputs& in);

enum class Family { kDIANA, kDCGD };
StepsizeBound stepsize_convex_general(const TheoryInputs& in, Family family);

/// EF21-P alone, strongly convex: gamma <= alpha / (16 L).
StepsizeBound stepsize_ef21p_strong(const TheoryInputs& in);

/// Radius of the EF21-P + DCGD neighborhood:
/// 8 omega / (n mu) * (1/n) sum_i ||grad f_i(x*)||^2.
double dcgd_neighborhood(const TheoryInputs& in, double mean_grad_norm_sq_at_opt);

/// Statistical term of the stochastic EF21-P + DIANA bound:
/// 24 (omega + 1) sigma^2 / (mu n).
double diana_statistical_term(const TheoryInputs& in);

// ---------------------------------------------------------------------------
// ABC framework: E||g(x)||^2 <= 2A (f(x) - f*) + B ||grad f(x)||^2 + C for the
// estimator g(x) = (1/n) sum_i C_i(g_i(x)).

enum class AbcCase { kFullGradient, kStrongGrowth, kBoundedVariance, kHomogeneous };

AbcCase abc_case_from_string(std::string_view s);
std::string_view to_string(AbcCase c);

struct ABCConstants {
  double A = 0.0;
  double B = 1.0;
  double C = 0.0;
  AbcCase abc_case = AbcCase::kFullGradient;
};

/// Four regimes: full gradients, strong growth (needs D), bounded variance
/// and homogeneous data (need sigma2).
ABCConstants abc_constants(AbcCase abc_case, const TheoryInputs& in);

struct Horizon {
  double bound = 0.0;   // 48 Delta0 L / eps * max{8/alpha, 4B, 96 Delta0 A/eps, 16C/eps}
  std::uint64_t T = 0;  // ceil(bound); 0 when Delta0 <= 0
};

Horizon horizon_T(const TheoryInputs& in, const ABCConstants& abc);

/// gamma = min{alpha/(8L), 1/(4BL), 1/sqrt(2 A L T), eps/(16 C L)} at a given T.
StepsizeBound stepsize_abc_at(const TheoryInputs& in, const ABCConstants& abc,
                              std::uint64_t T);

struct AbcSchedule {
  double gamma = 0.0;
  Horizon horizon;
  std::vector<double> terms;
};

/// T from the horizon formula first, then gamma at that T.
AbcSchedule stepsize_abc(const TheoryInputs& in, const ABCConstants& abc);

// Closed forms as stated for EF21-P + DCGD in the three nonconvex regimes;
// they should coincide with stepsize_abc composed with abc_constants.
AbcSchedule nonconvex_general_closed_form(const TheoryInputs& in);
AbcSchedule strong_growth_closed_form(const TheoryInputs& in);
AbcSchedule homogeneous_closed_form(const TheoryInputs& in);

// ---------------------------------------------------------------------------

struct LyapunovParts {
  double distance = 0.0;    // (1/(2 gamma)) ||x - x*||^2
  double suboptimality = 0.0;  // f(x) - f*
  double shifts = 0.0;      // 8 gamma omega (omega+1)/n^2 sum_i ||h_i - grad f_i(x*)||^2
  double total() const { return distance + suboptimality + shifts; }
};

/// V = (1/(2 gamma))||x - x*||^2 + (f(x) - f*)
///     + (8 gamma omega (omega + 1) / n^2) sum_i ||h_i - grad f_i(x*)||^2.
/// Pass an empty `shifts` to drop the last term.
LyapunovParts lyapunov_diana(const Problem& problem, std::span<const double> x,
                             std::span<const DenseVector> shifts,
                             const OptReference& reference, double gamma,
                             double omega);

struct SmoothnessCheck {
  std::string_view name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  double slack() const { return rhs - lhs; }
};

struct SmoothnessAudit {
  std::array<SmoothnessCheck, 4> checks;  // L_hat<=L_max, L_max<=nL, L<=L_hat, L_hat<=sqrt(n)L
  bool all_hold() const;
};

/// Orderings among L, L_hat, L_max for n workers, with relative slack `tol`.
/// For upper-bound constants only L <= L_hat <= L_max is meaningful; the
/// other two are still reported.
SmoothnessAudit smoothness_audit(const SmoothnessConstants& constants, std::size_t n,
                          double tol = 1e-10);

/// Proof-internal Lyapunov weights, reported read-only.
struct ProofWeights {
  double kappa = 0.0;  // <= 8 gamma omega / (n beta)
  double nu = 0.0;     // <= 192 gamma omega L_hat^2 / (n alpha) + 32 L / alpha
};
ProofWeights proof_weights(const TheoryInputs& in, double gamma, double beta);

}  // namespace bicomp::theory
