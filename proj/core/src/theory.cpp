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

#include "bicomp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bicomp/errors.hpp"

namespace bicomp::theory {

namespace {

// num / den with a zero denominator read as an absent (infinite) bound.
double ratio(double num, double den) {
  if (den == 0.0) return kInf;
  return num / den;
}

void require_nonneg(double v, const char* name) {
  if (!(v >= 0.0)) throw ConfigError(std::string("theory input ") + name + " must be >= 0");
}

void require_L(const TheoryInputs& in) {
  if (!(in.L > 0.0)) throw ConfigError("theory input L must be positive");
}

void require_epsilon(const TheoryInputs& in) {
  if (!(in.epsilon > 0.0)) throw ConfigError("theory input epsilon must be positive");
}

StepsizeBound from_terms(std::vector<double> terms, double beta) {
  StepsizeBound b;
  b.gamma = min_term(terms);
  b.beta = beta;
  b.terms = std::move(terms);
  return b;
}

std::uint64_t ceil_horizon(double bound) {
  if (!(bound > 0.0)) return 0;
  if (bound >= 1.8e19) throw ConfigError("iteration horizon overflows 64 bits");
  return static_cast<std::uint64_t>(std::ceil(bound));
}

// The three-term bound shared by the strongly convex DCGD and general convex
// rates.
std::vector<double> compressor_terms(const TheoryInputs& in) {
  return {
      ratio(in.n, 160.0 * in.omega * in.L_max),
      ratio(std::sqrt(in.n * in.alpha), 20.0 * std::sqrt(in.omega) * in.L_hat),
      ratio(in.alpha, 100.0 * in.L),
  };
}

AbcSchedule schedule(std::vector<double> terms, double bound) {
  AbcSchedule s;
  s.horizon.bound = bound;
  s.horizon.T = ceil_horizon(bound);
  s.gamma = min_term(terms);
  s.terms = std::move(terms);
  return s;
}

}  // namespace

void validate(const TheoryInputs& in) {
  if (!(in.n >= 1.0)) throw ConfigError("theory input n must be >= 1");
  require_nonneg(in.omega, "omega");
  require_nonneg(in.L, "L");
  require_nonneg(in.L_max, "L_max");
  require_nonneg(in.L_hat, "L_hat");
  require_nonneg(in.mu, "mu");
  require_nonneg(in.sigma2, "sigma2");
  require_nonneg(in.delta_star, "delta_star");
  require_nonneg(in.epsilon, "epsilon");
  if (in.D) require_nonneg(*in.D, "D");
  if (!(in.alpha > 0.0 && in.alpha <= 1.0))
    throw ConfigError("theory input alpha must lie in (0, 1]");
  if (in.mu > in.L * (1.0 + 1e-12))
    throw ConfigError("theory input mu exceeds L");
}

double min_term(std::span<const double> terms) {
  double m = kInf;
  for (double t : terms)
    if (!std::isnan(t)) m = std::min(m, t);
  return m;
}

StepsizeBound stepsize_diana_strong(const TheoryInputs& in) {
  validate(in);
  require_L(in);
  auto terms = compressor_terms(in);
  terms.push_back(ratio(1.0, (in.omega + 1.0) * in.mu));
  return from_terms(std::move(terms), 1.0 / (in.omega + 1.0));
}

StepsizeBound stepsize_dcgd_strong(const TheoryInputs& in) {
  validate(in);
  require_L(in);
  return from_terms(compressor_terms(in), 0.0);
}

StepsizeBound stepsize_convex_general(const TheoryInputs& in, Family family) {
  validate(in);
  require_L(in);
  return from_terms(compressor_terms(in),
                    family == Family::kDIANA ? 1.0 / (in.omega + 1.0) : 0.0);
}

StepsizeBound stepsize_ef21p_strong(const TheoryInputs& in) {
  validate(in);
  require_L(in);
  return from_terms({in.alpha / (16.0 * in.L)}, 0.0);
}

double dcgd_neighborhood(const TheoryInputs& in, double mean_grad_norm_sq_at_opt) {
  validate(in);
  if (in.omega == 0.0 || mean_grad_norm_sq_at_opt == 0.0) return 0.0;
  return ratio(8.0 * in.omega, in.n * in.mu) * mean_grad_norm_sq_at_opt;
}

double diana_statistical_term(const TheoryInputs& in) {
  validate(in);
  if (in.sigma2 == 0.0) return 0.0;
  return ratio(24.0 * (in.omega + 1.0) * in.sigma2, in.mu * in.n);
}

AbcCase abc_case_from_string(std::string_view s) {
  if (s == "full_grad") return AbcCase::kFullGradient;
  if (s == "strong_growth") return AbcCase::kStrongGrowth;
  if (s == "bounded_var") return AbcCase::kBoundedVariance;
  if (s == "homogeneous") return AbcCase::kHomogeneous;
  throw ConfigError("unknown ABC case '" + std::string(s) +
                    "' (expected full_grad, strong_growth, bounded_var or homogeneous)");
}

std::string_view to_string(AbcCase c) {
  switch (c) {
    case AbcCase::kFullGradient: return "full_grad";
    case AbcCase::kStrongGrowth: return "strong_growth";
    case AbcCase::kBoundedVariance: return "bounded_var";
    case AbcCase::kHomogeneous: return "homogeneous";
  }
  return "?";
}

ABCConstants abc_constants(AbcCase abc_case, const TheoryInputs& in) {
  validate(in);
  ABCConstants k;
  k.abc_case = abc_case;
  switch (abc_case) {
    case AbcCase::kFullGradient:
      k.A = in.omega * in.L_max / in.n;
      k.B = 1.0;
      k.C = 2.0 * k.A * in.delta_star;
      break;
    case AbcCase::kStrongGrowth:
      if (!in.D) throw ConfigError("strong-growth ABC constants need D");
      k.A = 0.0;
      k.B = *in.D * in.omega / in.n + 1.0;
      k.C = 0.0;
      break;
    case AbcCase::kBoundedVariance:
      k.A = in.omega * in.L_max / in.n;
      k.B = 1.0;
      k.C = 2.0 * k.A * in.delta_star + (in.omega + 1.0) / in.n * in.sigma2;
      break;
    case AbcCase::kHomogeneous:
      k.A = 0.0;
      k.B = in.omega / in.n + 1.0;
      k.C = (in.omega + 1.0) / in.n * in.sigma2;
      break;
  }
  return k;
}

Horizon horizon_T(const TheoryInputs& in, const ABCConstants& abc) {
  validate(in);
  require_L(in);
  require_epsilon(in);
  Horizon h;
  if (!(in.delta0 > 0.0)) return h;
  const double e = in.epsilon;
  const double m = std::max({8.0 / in.alpha, 4.0 * abc.B, 96.0 * in.delta0 * abc.A / e,
                             16.0 * abc.C / e});
  h.bound = 48.0 * in.delta0 * in.L / e * m;
  h.T = ceil_horizon(h.bound);
  return h;
}

StepsizeBound stepsize_abc_at(const TheoryInputs& in, const ABCConstants& abc,
                              std::uint64_t T) {
  validate(in);
  require_L(in);
  require_epsilon(in);
  const double t = static_cast<double>(T);
  return from_terms({in.alpha / (8.0 * in.L), ratio(1.0, 4.0 * abc.B * in.L),
                     ratio(1.0, std::sqrt(2.0 * abc.A * in.L * t)),
                     ratio(in.epsilon, 16.0 * abc.C * in.L)},
                    0.0);
}

AbcSchedule stepsize_abc(const TheoryInputs& in, const ABCConstants& abc) {
  AbcSchedule s;
  s.horizon = horizon_T(in, abc);
  StepsizeBound b = stepsize_abc_at(in, abc, s.horizon.T);
  s.gamma = b.gamma;
  s.terms = std::move(b.terms);
  return s;
}

AbcSchedule nonconvex_general_closed_form(const TheoryInputs& in) {
  validate(in);
  require_L(in);
  require_epsilon(in);
  const double e = in.epsilon;
  const double k = in.omega * in.L_max;
  const double bound =
      in.delta0 > 0.0
          ? 48.0 * in.delta0 * in.L / e *
                std::max({8.0 / in.alpha, 96.0 * in.delta0 * k / (in.n * e),
                          32.0 * in.delta_star * k / (in.n * e)})
          : 0.0;
  const double T = static_cast<double>(ceil_horizon(bound));
  return schedule({in.alpha / (8.0 * in.L),
                   ratio(std::sqrt(in.n), std::sqrt(2.0 * in.omega * in.L * in.L_max * T)),
                   ratio(in.n * e, 32.0 * in.delta_star * in.omega * in.L * in.L_max)},
                  bound);
}

AbcSchedule strong_growth_closed_form(const TheoryInputs& in) {
  validate(in);
  require_L(in);
  require_epsilon(in);
  if (!in.D) throw ConfigError("strong-growth stepsize needs D");
  const double D = *in.D;
  const double bound =
      in.delta0 > 0.0
          ? 48.0 * in.delta0 * in.L / in.epsilon * std::max(8.0 / in.alpha, 4.0 * D * in.omega / in.n)
          : 0.0;
  return schedule({in.alpha / (8.0 * in.L), ratio(in.n, 4.0 * D * in.omega * in.L)}, bound);
}

AbcSchedule homogeneous_closed_form(const TheoryInputs& in) {
  validate(in);
  require_L(in);
  require_epsilon(in);
  const double e = in.epsilon;
  const double growth = in.omega / in.n + 1.0;
  const double noise = (in.omega + 1.0) * in.sigma2;
  const double bound =
      in.delta0 > 0.0
          ? 48.0 * in.delta0 * in.L / e *
                std::max({8.0 / in.alpha, 4.0 * growth, 16.0 * noise / (in.n * e)})
          : 0.0;
  return schedule({in.alpha / (8.0 * in.L), 1.0 / (4.0 * growth * in.L),
                   ratio(in.n * e, 16.0 * noise * in.L)},
                  bound);
}

LyapunovParts lyapunov_diana(const Problem& problem, std::span<const double> x,
                             std::span<const DenseVector> shifts,
                             const OptReference& reference, double gamma, double omega) {
  if (reference.x_star.size() != problem.dim())
    throw ConfigError("lyapunov: missing or mismatched optimum reference");
  if (!(gamma > 0.0)) throw ConfigError("lyapunov: gamma must be positive");
  LyapunovParts v;
  v.distance = dist_sq(x, reference.x_star) / (2.0 * gamma);
  v.suboptimality = problem.value(x) - reference.f_star;
  if (!shifts.empty() && omega > 0.0) {
    if (shifts.size() != problem.n_workers())
      throw ConfigError("lyapunov: need one shift per worker");
    DenseVector g(problem.dim());
    double acc = 0.0;
    for (std::size_t i = 0; i < shifts.size(); ++i) {
      problem.grad_i(i, reference.x_star, g);
      acc += dist_sq(shifts[i], g);
    }
    const double n = static_cast<double>(problem.n_workers());
    v.shifts = 8.0 * gamma * omega * (omega + 1.0) / (n * n) * acc;
  }
  return v;
}

bool SmoothnessAudit::all_hold() const {
  return std::all_of(checks.begin(), checks.end(), [](const SmoothnessCheck& c) { return c.holds; });
}

SmoothnessAudit smoothness_audit(const SmoothnessConstants& c, std::size_t n, double tol) {
  const double nn = static_cast<double>(n);
  auto check = [tol](std::string_view name, double lhs, double rhs) {
    SmoothnessCheck k;
    k.name = name;
    k.lhs = lhs;
    k.rhs = rhs;
    k.holds = lhs <= rhs + tol * std::max(1.0, std::abs(rhs));
    return k;
  };
  SmoothnessAudit r;
  r.checks[0] = check("L_hat <= L_max", c.L_hat, c.L_max);
  r.checks[1] = check("L_max <= n L", c.L_max, nn * c.L);
  r.checks[2] = check("L <= L_hat", c.L, c.L_hat);
  r.checks[3] = check("L_hat <= sqrt(n) L", c.L_hat, std::sqrt(nn) * c.L);
  return r;
}

ProofWeights proof_weights(const TheoryInputs& in, double gamma, double beta) {
  ProofWeights w;
  w.kappa = in.omega == 0.0 ? 0.0 : ratio(8.0 * gamma * in.omega, in.n * beta);
  w.nu = 192.0 * gamma * in.omega * in.L_hat * in.L_hat / (in.n * in.alpha) + 32.0 * in.L / in.alpha;
  return w;
}

}  // namespace bicomp::theory
