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

#include <cmath>

#include <gtest/gtest.h>

#include "bicomp/errors.hpp"
#include "bicomp/problems.hpp"
#include "bicomp/theory.hpp"
#include "oracles.hpp"

namespace bicomp::theory {
namespace {

TheoryInputs base_inputs() {
  TheoryInputs in;
  in.n = 100;
  in.omega = 9;
  in.alpha = 0.1;
  in.L = in.L_max = in.L_hat = 1.0;
  in.mu = 0.01;
  return in;
}

TEST(DianaStrong, WorkedExample) {
  const auto b = stepsize_diana_strong(base_inputs());
  ASSERT_EQ(b.terms.size(), 4u);
  EXPECT_NEAR(b.terms[0], 100.0 / 1440.0, 1e-15);
  EXPECT_NEAR(b.terms[1], std::sqrt(10.0) / 60.0, 1e-15);
  EXPECT_NEAR(b.terms[0], 0.069444, 1e-6);
  EXPECT_NEAR(b.terms[1], 0.0527046, 1e-7);
  EXPECT_NEAR(b.terms[2], 0.001, 1e-18);
  EXPECT_NEAR(b.terms[3], 10.0, 1e-12);
  EXPECT_NEAR(b.gamma, 0.001, 1e-18);
  EXPECT_EQ(b.beta, 0.1);
}

TEST(DianaStrong, IdentityDualDropsOmegaTerms) {
  TheoryInputs in = base_inputs();
  in.omega = 0;
  in.mu = 0.5;
  const auto b = stepsize_diana_strong(in);
  EXPECT_EQ(b.gamma, std::min(in.alpha / (100 * in.L), 1.0 / in.mu));
  EXPECT_EQ(b.beta, 1.0);
  EXPECT_TRUE(std::isinf(b.terms[0]));
  EXPECT_TRUE(std::isinf(b.terms[1]));
}

TEST(DianaStrong, HomogeneousOfDegreeMinusOne) {
  for (double c : {0.5, 3.0, 1e3}) {
    TheoryInputs in = base_inputs();
    in.L_max = 1.7;
    in.L_hat = 1.3;
    const double g = stepsize_diana_strong(in).gamma;
    in.L *= c;
    in.L_max *= c;
    in.L_hat *= c;
    in.mu *= c;
    EXPECT_NEAR(stepsize_diana_strong(in).gamma, g / c, 1e-15 * g / c);
  }
}

TEST(DcgdStrong, MatchesWithoutMuTerm) {
  const auto b = stepsize_dcgd_strong(base_inputs());
  EXPECT_EQ(b.terms.size(), 3u);
  EXPECT_NEAR(b.gamma, 0.001, 1e-18);
  TheoryInputs in = base_inputs();
  in.alpha = 1.0;
  in.omega = 0.0;
  in.L = 2.0;
  EXPECT_EQ(stepsize_dcgd_strong(in).gamma, 1.0 / 200.0);
  EXPECT_EQ(stepsize_convex_general(in, Family::kDCGD).gamma, 1.0 / 200.0);
  EXPECT_EQ(stepsize_convex_general(base_inputs(), Family::kDIANA).beta, 0.1);
}

TEST(DcgdStrong, NeighborhoodRadius) {
  const QuadraticProblem p(oracle::diagonal_quadratic({{1.0}, {3.0}}, {{1.0}, {-1.0}}));
  const auto ref = p.compute_opt_reference(1e-14);
  // x* = 0 / 2 = 0; grad f_1(0) = -1, grad f_2(0) = 1.
  EXPECT_NEAR(ref.mean_grad_norm_sq_at_opt(), 1.0, 1e-15);
  TheoryInputs in;
  in.n = 2;
  in.omega = 3;
  in.alpha = 1;
  in.L = in.mu = 2;
  in.L_max = 3;
  in.L_hat = std::sqrt(5.0);
  EXPECT_NEAR(dcgd_neighborhood(in, ref.mean_grad_norm_sq_at_opt()), 8.0 * 3 / (2 * 2), 1e-14);
  in.omega = 0;
  EXPECT_EQ(dcgd_neighborhood(in, 1.0), 0.0);
}

TEST(Ef21pStrong, AlphaOverSixteenL) {
  TheoryInputs in = base_inputs();
  EXPECT_EQ(stepsize_ef21p_strong(in).gamma, 0.1 / 16.0);
}

TEST(Stepsizes, MonotoneOnGrid) {
  using Fn = double (*)(const TheoryInputs&);
  const Fn fns[] = {
      [](const TheoryInputs& in) { return stepsize_diana_strong(in).gamma; },
      [](const TheoryInputs& in) { return stepsize_dcgd_strong(in).gamma; },
      [](const TheoryInputs& in) { return stepsize_ef21p_strong(in).gamma; },
  };
  const double grid[] = {0.1, 0.5, 1.0, 2.0, 7.0};
  for (Fn f : fns) {
    for (double a : grid) {
      for (double b : grid) {
        if (b <= a) continue;
        auto lo = base_inputs(), hi = base_inputs();
        lo.L_max = a; hi.L_max = b;
        EXPECT_GE(f(lo), f(hi));
        lo = hi = base_inputs();
        lo.L_hat = a; hi.L_hat = b;
        EXPECT_GE(f(lo), f(hi));
        lo = hi = base_inputs();
        lo.L = a; hi.L = b;
        lo.mu = hi.mu = 0.01;
        EXPECT_GE(f(lo), f(hi));
        lo = hi = base_inputs();
        lo.omega = a; hi.omega = b;
        EXPECT_GE(f(lo), f(hi));
        lo = hi = base_inputs();
        lo.n = 1 + a; hi.n = 1 + b;
        EXPECT_LE(f(lo), f(hi));
        lo = hi = base_inputs();
        lo.alpha = a / 10; hi.alpha = b / 10;
        EXPECT_LE(f(lo), f(hi));
      }
    }
  }
}

TEST(Abc, WorkedExamples) {
  TheoryInputs in;
  in.n = 10;
  in.omega = 9;
  in.L = 1;
  in.L_max = 2;
  const auto p1 = abc_constants(AbcCase::kFullGradient, in);
  EXPECT_NEAR(p1.A, 1.8, 1e-15);
  EXPECT_EQ(p1.B, 1.0);
  EXPECT_EQ(p1.C, 0.0);

  TheoryInputs g = in;
  g.omega = 0;
  g.D = 5.0;
  const auto p2 = abc_constants(AbcCase::kStrongGrowth, g);
  EXPECT_EQ(p2.A, 0.0);
  EXPECT_EQ(p2.B, 1.0);
  EXPECT_EQ(p2.C, 0.0);

  const auto p4 = abc_constants(AbcCase::kHomogeneous, in);
  EXPECT_EQ(p4.A, 0.0);
  EXPECT_NEAR(p4.B, 1.9, 1e-15);
  EXPECT_EQ(p4.C, 0.0);

  EXPECT_THROW(abc_constants(AbcCase::kStrongGrowth, in), ConfigError);
}

TEST(Abc, BoundedVarianceWithoutNoiseIsFullGradient) {
  TheoryInputs in = base_inputs();
  in.delta_star = 0.37;
  const auto a = abc_constants(AbcCase::kFullGradient, in);
  const auto b = abc_constants(AbcCase::kBoundedVariance, in);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_EQ(a.C, b.C);
  in.sigma2 = 2.0;
  EXPECT_NEAR(abc_constants(AbcCase::kBoundedVariance, in).C - a.C, 10.0 * 2.0 / 100.0, 1e-15);
}

TEST(Abc, NoiselessContractiveCase) {
  TheoryInputs in;
  in.alpha = 1.0;
  in.L = 2.0;
  in.delta0 = 3.0;
  in.epsilon = 0.1;
  ABCConstants k;
  const auto s = stepsize_abc(in, k);
  EXPECT_EQ(s.gamma, 1.0 / 16.0);
  EXPECT_EQ(s.horizon.T, static_cast<std::uint64_t>(std::ceil(384.0 * 3.0 * 2.0 / 0.1)));
}

TEST(Abc, StepsizeRespectsCapsAtHorizon) {
  TheoryInputs in = base_inputs();
  in.delta0 = 2.0;
  in.delta_star = 0.1;
  in.epsilon = 1e-2;
  const auto k = abc_constants(AbcCase::kFullGradient, in);
  const auto s = stepsize_abc(in, k);
  const double T = static_cast<double>(s.horizon.T);
  EXPECT_GE(T, s.horizon.bound);
  EXPECT_LE(s.gamma, in.alpha / (8 * in.L));
  EXPECT_LE(s.gamma, 1.0 / (4 * k.B * in.L));
  EXPECT_LE(s.gamma, 1.0 / std::sqrt(2 * k.A * in.L * T));
  EXPECT_LE(s.gamma, in.epsilon / (16 * k.C * in.L));
}

TEST(Abc, AtOptimumHorizonIsZero) {
  TheoryInputs in = base_inputs();
  in.epsilon = 1e-3;
  EXPECT_EQ(horizon_T(in, ABCConstants{}).T, 0u);
  in.epsilon = 0.0;
  EXPECT_THROW(horizon_T(in, ABCConstants{}), ConfigError);
}

TEST(Abc, FullGradientMatchesClosedForm) {
  TheoryInputs in = base_inputs();
  in.delta0 = 1.5;
  in.delta_star = 0.2;
  in.epsilon = 0.05;
  const auto a = stepsize_abc(in, abc_constants(AbcCase::kFullGradient, in));
  const auto c = nonconvex_general_closed_form(in);
  EXPECT_EQ(a.horizon.T, c.horizon.T);
  EXPECT_NEAR(a.gamma, c.gamma, 1e-12 * c.gamma);
  EXPECT_NEAR(a.terms[0], c.terms[0], 1e-12 * c.terms[0]);
  EXPECT_NEAR(a.terms[2], c.terms[1], 1e-12 * c.terms[1]);
  EXPECT_NEAR(a.terms[3], c.terms[2], 1e-12 * c.terms[2]);
}

TEST(Abc, HomogeneousMatchesClosedForm) {
  TheoryInputs in = base_inputs();
  in.delta0 = 1.5;
  in.sigma2 = 0.3;
  in.epsilon = 0.05;
  const auto a = stepsize_abc(in, abc_constants(AbcCase::kHomogeneous, in));
  const auto c = homogeneous_closed_form(in);
  EXPECT_EQ(a.horizon.T, c.horizon.T);
  EXPECT_NEAR(a.terms[0], c.terms[0], 1e-12 * c.terms[0]);
  EXPECT_NEAR(a.terms[1], c.terms[1], 1e-12 * c.terms[1]);
  EXPECT_NEAR(a.terms[3], c.terms[2], 1e-12 * c.terms[2]);
}

TEST(Abc, StrongGrowthAgreesWhenCompressionDominates) {
  // Both forms pick alpha/(8L) and 8/alpha when D w/n + 1 <= 2/alpha.
  TheoryInputs in = base_inputs();
  in.D = 2.0;
  in.delta0 = 1.0;
  in.epsilon = 0.1;
  const auto a = stepsize_abc(in, abc_constants(AbcCase::kStrongGrowth, in));
  const auto c = strong_growth_closed_form(in);
  EXPECT_EQ(a.horizon.T, c.horizon.T);
  EXPECT_EQ(a.gamma, c.gamma);
}

TEST(Lyapunov, ZeroAtOptimumWithOptimalShifts) {
  RandomQuadraticOptions o;
  o.n_workers = 3;
  o.dim = 5;
  o.seed = 2;
  const QuadraticProblem p(random_quadratic(o));
  const auto ref = p.compute_opt_reference(1e-14);
  std::vector<DenseVector> h(3, DenseVector(5));
  for (std::size_t i = 0; i < 3; ++i) p.grad_i(i, ref.x_star, h[i]);
  const auto v = lyapunov_diana(p, ref.x_star, h, ref, 0.1, 4.0);
  EXPECT_NEAR(v.total(), 0.0, 1e-13);

  const DenseVector x(5, 1.0);
  const std::vector<DenseVector> zero(3, DenseVector(5, 0.0));
  const auto w = lyapunov_diana(p, x, zero, ref, 0.1, 0.0);
  EXPECT_EQ(w.shifts, 0.0);
  EXPECT_NEAR(w.total(), dist_sq(x, ref.x_star) / 0.2 + p.value(x) - ref.f_star, 1e-12);
  EXPECT_GT(lyapunov_diana(p, x, zero, ref, 0.1, 4.0).shifts, 0.0);
  EXPECT_THROW(lyapunov_diana(p, x, zero, OptReference{}, 0.1, 1.0), ConfigError);
}

TEST(SmoothnessAudit, TwoWorkerExample) {
  const QuadraticProblem p(oracle::diagonal_quadratic({{1.0}, {3.0}}, {{0.0}, {0.0}}));
  const auto r = smoothness_audit(p.estimate_constants(), 2);
  EXPECT_TRUE(r.all_hold());
  EXPECT_NEAR(r.checks[0].lhs, std::sqrt(5.0), 1e-14);
  EXPECT_NEAR(r.checks[0].rhs, 3.0, 1e-14);
  EXPECT_GT(r.checks[0].slack(), 0.0);
}

TEST(SmoothnessAudit, SingleWorkerEqualities) {
  SmoothnessConstants c;
  c.L = c.L_max = c.L_hat = 2.5;
  const auto r = smoothness_audit(c, 1);
  EXPECT_TRUE(r.all_hold());
  for (const auto& k : r.checks) EXPECT_EQ(k.slack(), 0.0);
}

TEST(SmoothnessAudit, RandomSpdEnsembles) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RandomQuadraticOptions o;
    o.n_workers = 2 + seed % 7;
    o.dim = 3 + seed % 5;
    o.eig_min = 0.01;
    o.eig_max = 1.0 + static_cast<double>(seed);
    o.seed = seed;
    const QuadraticProblem p(random_quadratic(o));
    EXPECT_TRUE(smoothness_audit(p.estimate_constants(), o.n_workers).all_hold()) << "seed " << seed;
  }
  SmoothnessConstants bad;
  bad.L = 1.0;
  bad.L_max = 5.0;
  bad.L_hat = 6.0;
  EXPECT_FALSE(smoothness_audit(bad, 2).all_hold());
}

TEST(ProofWeights, Formulas) {
  TheoryInputs in = base_inputs();
  const auto w = proof_weights(in, 0.001, 0.1);
  EXPECT_NEAR(w.kappa, 8 * 0.001 * 9 / (100 * 0.1), 1e-15);
  EXPECT_NEAR(w.nu, 192 * 0.001 * 9 / (100 * 0.1) + 320.0, 1e-12);
}

TEST(Validate, RejectsBadInputs) {
  TheoryInputs in = base_inputs();
  in.alpha = 0.0;
  EXPECT_THROW(stepsize_diana_strong(in), ConfigError);
  in = base_inputs();
  in.mu = 2.0;
  EXPECT_THROW(stepsize_diana_strong(in), ConfigError);
  in = base_inputs();
  in.L = 0.0;
  in.mu = 0.0;
  EXPECT_THROW(stepsize_dcgd_strong(in), ConfigError);
  in = base_inputs();
  in.omega = -1;
  EXPECT_THROW(stepsize_dcgd_strong(in), ConfigError);
  EXPECT_EQ(abc_case_from_string(to_string(AbcCase::kBoundedVariance)), AbcCase::kBoundedVariance);
  EXPECT_THROW(abc_case_from_string("nope"), ConfigError);
}

}  // namespace
}  // namespace bicomp::theory
