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
#include <memory>
#include <optional>

#include <gtest/gtest.h>

#include "bicomp/errors.hpp"
#include "bicomp/problems.hpp"
#include "oracles.hpp"

namespace bicomp {
namespace {

constexpr double kFdTol = 1e-5;

DenseVector random_point(Rng& rng, std::size_t d, double scale = 1.0) {
  DenseVector x(d);
  for (double& v : x) v = scale * rng.normal();
  return x;
}

std::vector<double> dense_row(const SparseRow& r, std::size_t d) {
  std::vector<double> a(d, 0.0);
  for (std::size_t t = 0; t < r.indices.size(); ++t) a[r.indices[t]] = r.values[t];
  return a;
}

void expect_gradients_match(const Problem& p, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  for (int point = 0; point < 20; ++point) {
    const DenseVector x = random_point(rng, p.dim(), scale);
    for (std::size_t i = 0; i < p.n_workers(); ++i) {
      DenseVector g(p.dim());
      p.grad_i(i, x, g);
      const auto fd = oracle::central_difference(
          [&](const std::vector<double>& y) { return p.value_i(i, y); }, x);
      ASSERT_LE(oracle::relative_error(g, fd), kFdTol) << "worker " << i << " point " << point;
    }
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& y) { return p.value(y); }, x);
    ASSERT_LE(oracle::relative_error(p.grad(x), fd), kFdTol);
  }
}

std::shared_ptr<const Dataset> toy_dataset(std::size_t samples, std::size_t features,
                                           std::size_t classes, std::uint64_t seed) {
  SyntheticLogisticOptions o;
  o.samples = samples;
  o.features = features;
  o.classes = classes;
  o.seed = seed;
  return std::make_shared<const Dataset>(synthetic_logistic_dataset(o));
}

LogisticProblem toy_logistic(std::size_t samples, std::size_t features, std::size_t classes,
                             std::size_t workers, std::optional<double> lambda,
                             std::uint64_t seed = 1) {
  auto data = toy_dataset(samples, features, classes, seed);
  const Partition part = partition(samples, workers, PartitionStrategy::kContiguous, seed);
  return LogisticProblem(make_logistic_spec(data, part, lambda));
}

// ---------------------------------------------------------------------------
// Quadratics

TEST(Quadratic, OneDimensional) {
  const QuadraticProblem p(oracle::diagonal_quadratic({{1.0}}, {{0.0}}));
  const auto c = p.estimate_constants();
  EXPECT_EQ(c.L, 1.0);
  EXPECT_EQ(c.mu, 1.0);
  EXPECT_EQ(p.value(DenseVector{2.0}), 2.0);
  EXPECT_EQ(p.compute_opt_reference(1e-10).x_star, DenseVector{0.0});
}

TEST(Quadratic, TwoWorkerConstants) {
  const QuadraticProblem p(oracle::diagonal_quadratic({{1.0}, {3.0}}, {{0.0}, {0.0}}));
  const auto c = p.estimate_constants();
  EXPECT_NEAR(c.L, 2.0, 1e-14);
  EXPECT_NEAR(c.L_max, 3.0, 1e-14);
  EXPECT_NEAR(c.L_hat, std::sqrt(5.0), 1e-14);
  EXPECT_NEAR(c.mu, 2.0, 1e-14);
  EXPECT_FALSE(c.upper_bound);
  EXPECT_LE(c.L, c.L_hat);
  EXPECT_LE(c.L_hat, c.L_max);
  EXPECT_LE(c.L_max, 2.0 * c.L);
}

TEST(Quadratic, SingleWorkerConstantsCoincide) {
  RandomQuadraticOptions o;
  o.n_workers = 1;
  o.dim = 6;
  o.seed = 3;
  const QuadraticProblem p(random_quadratic(o));
  const auto c = p.estimate_constants();
  EXPECT_NEAR(c.L, c.L_max, 1e-12);
  EXPECT_NEAR(c.L, c.L_hat, 1e-12);
}

TEST(Quadratic, ReferenceSolvesNormalEquations) {
  RandomQuadraticOptions o;
  o.seed = 5;
  const QuadraticProblem p(random_quadratic(o));
  const auto ref = p.compute_opt_reference(1e-10);
  EXPECT_LE(ref.grad_norm, 1e-10);
  EXPECT_EQ(ref.grad_norms_at_opt.size(), p.n_workers());
  EXPECT_GT(ref.mean_grad_norm_sq_at_opt(), 0.0);
  EXPECT_NEAR(ref.f_star, p.value(ref.x_star), 0.0);
}

TEST(Quadratic, InterpolationZeroesWorkerGradients) {
  RandomQuadraticOptions o;
  o.interpolation = true;
  o.seed = 6;
  const QuadraticProblem p(random_quadratic(o));
  for (double g : p.compute_opt_reference(1e-10).grad_norms_at_opt) EXPECT_LE(g, 1e-20);
}

TEST(Quadratic, ValueIsMeanOfWorkerValues) {
  RandomQuadraticOptions o;
  o.seed = 7;
  const QuadraticProblem p(random_quadratic(o));
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const DenseVector x = random_point(rng, p.dim(), 3.0);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.n_workers(); ++i) acc += p.value_i(i, x);
    const double mean = acc / static_cast<double>(p.n_workers());
    EXPECT_NEAR(p.value(x), mean, 1e-12 * std::abs(mean));
  }
}

TEST(Quadratic, FiniteDifferences) {
  RandomQuadraticOptions o;
  o.n_workers = 3;
  o.dim = 8;
  o.seed = 8;
  expect_gradients_match(QuadraticProblem(random_quadratic(o)), 10);
}

TEST(Quadratic, GradientNormBoundedBySuboptimality) {
  RandomQuadraticOptions o;
  o.seed = 9;
  o.eig_min = 0.5;
  o.eig_max = 4.0;
  const QuadraticProblem p(random_quadratic(o));
  const auto c = p.estimate_constants();
  const auto ref = p.compute_opt_reference(1e-10);
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const DenseVector x = random_point(rng, p.dim(), 2.0);
    EXPECT_LE(norm_sq(p.grad(x)), 2.0 * c.L * (p.value(x) - ref.f_star) * (1.0 + 1e-9) + 1e-14);
  }
}

TEST(Quadratic, RejectsBadInput) {
  QuadraticSpec s = oracle::diagonal_quadratic({{1.0, 1.0}}, {{0.0, 0.0}});
  s.A[0](0, 1) = 0.5;
  EXPECT_THROW(QuadraticProblem{s}, ConfigError);
  EXPECT_THROW(QuadraticProblem(oracle::diagonal_quadratic({{1.0, -1.0}}, {{0.0, 0.0}})),
               ConfigError);
  QuadraticSpec mismatch = oracle::diagonal_quadratic({{1.0, 1.0}, {1.0}}, {{0.0, 0.0}, {0.0}});
  EXPECT_THROW(QuadraticProblem{mismatch}, ConfigError);
  EXPECT_THROW(QuadraticProblem{QuadraticSpec{}}, ConfigError);
}

TEST(Quadratic, SingularMeanHasNoReference) {
  const QuadraticProblem p(oracle::diagonal_quadratic({{1.0, 0.0}}, {{0.0, 0.0}}));
  EXPECT_EQ(p.estimate_constants().mu, 0.0);
  EXPECT_THROW(p.compute_opt_reference(1e-10), ConfigError);
}

TEST(Quadratic, StochasticNoiseVariance) {
  QuadraticSpec s = oracle::diagonal_quadratic({{1.0, 2.0, 3.0}}, {{1.0, 0.0, -1.0}});
  s.noise_sigma = 0.5;
  const QuadraticProblem p(s);
  const DenseVector x{1.0, 1.0, 1.0};
  const double v = estimate_gradient_variance(p, 0, x, 4, 20000, 3);
  EXPECT_NEAR(v, 0.25 / 4.0, 0.05 * 0.25 / 4.0);
  Rng rng(0);
  DenseVector g(3);
  EXPECT_THROW(p.stochastic_grad_i(0, x, 0, rng, g), ConfigError);
}

TEST(Quadratic, DimensionMismatchThrows) {
  const QuadraticProblem p(oracle::diagonal_quadratic({{1.0, 1.0}}, {{0.0, 0.0}}));
  EXPECT_THROW(p.value(DenseVector{1.0}), ConfigError);
}

// ---------------------------------------------------------------------------
// Logistic regression

TEST(Logistic, HandEvaluatedAtZero) {
  Dataset d;
  d.rows.push_back({{0}, {1.0}});
  d.labels = {"0"};
  d.d_features = 2;
  auto data = std::make_shared<const Dataset>(d);
  LogisticSpec spec;
  spec.data = data;
  spec.class_ids = {0};
  spec.classes = 2;
  spec.d_features = 2;
  spec.worker_samples = {{0}};
  const LogisticProblem p(spec);
  DenseVector g(4);
  const double v = p.logreg_value_grad(0, DenseVector(4, 0.0), g);
  EXPECT_NEAR(v, std::log(2.0), 1e-15);
  EXPECT_EQ(g, (DenseVector{-0.5, 0.0, 0.5, 0.0}));
}

TEST(Logistic, EqualClassRowsGiveLogC) {
  const LogisticProblem p = toy_logistic(30, 4, 3, 2, std::nullopt);
  DenseVector x(p.dim());
  Rng rng(1);
  const DenseVector row = random_point(rng, 4);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t j = 0; j < 4; ++j) x[c * 4 + j] = row[j];
  for (std::size_t i = 0; i < p.n_workers(); ++i) EXPECT_NEAR(p.value_i(i, x), std::log(3.0), 1e-14);
}

TEST(Logistic, MatchesDirectSoftmax) {
  auto data = toy_dataset(12, 5, 3, 2);
  const Partition part = partition(12, 1, PartitionStrategy::kContiguous, 0);
  const LogisticProblem p(make_logistic_spec(data, part, std::nullopt));
  const LabelMap labels = map_labels(*data);
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const DenseVector x = random_point(rng, p.dim());
    double acc = 0.0;
    for (std::size_t s = 0; s < data->n_samples(); ++s)
      acc += oracle::softmax_loss(dense_row(data->rows[s], 5), labels.ids[s], x, 3);
    EXPECT_NEAR(p.value(x), acc / 12.0, 1e-12);
  }
}

TEST(Logistic, StableForLargeScores) {
  const LogisticProblem p = toy_logistic(20, 4, 2, 1, std::nullopt);
  Rng rng(4);
  const DenseVector x = random_point(rng, p.dim(), 1e4);
  DenseVector g(p.dim());
  const double v = p.logreg_value_grad(0, x, g);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_TRUE(all_finite(g));
}

TEST(Logistic, FiniteDifferences) {
  expect_gradients_match(toy_logistic(20, 10, 2, 2, std::nullopt), 11);
  expect_gradients_match(toy_logistic(24, 4, 3, 3, std::nullopt), 12);
}

TEST(Logistic, FiniteDifferencesWithRegularizer) {
  expect_gradients_match(toy_logistic(20, 5, 2, 2, 0.1), 13);
  expect_gradients_match(toy_logistic(30, 3, 4, 3, 1e-3), 14, 2.0);
}

TEST(Regularizer, Examples) {
  DenseVector g(1, 0.0);
  EXPECT_NEAR(nonconvex_reg_value_grad(DenseVector{1.0}, 0.001, g), 0.0005, 1e-18);
  EXPECT_NEAR(g[0], 0.0005, 1e-18);
  DenseVector g0(3, 0.0);
  EXPECT_EQ(nonconvex_reg_value_grad(DenseVector(3, 0.0), 0.5, g0), 0.0);
  EXPECT_EQ(g0, DenseVector(3, 0.0));
  Rng rng(5);
  const DenseVector x = random_point(rng, 40, 100.0);
  EXPECT_LT(nonconvex_reg_value_grad(x, 0.3, {}), 0.3 * 40);
}

TEST(Regularizer, FiniteDifferences) {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const DenseVector x = random_point(rng, 20, 2.0);
    DenseVector g(20, 0.0);
    nonconvex_reg_value_grad(x, 0.7, g);
    const auto fd = oracle::central_difference(
        [](const std::vector<double>& y) { return nonconvex_reg_value_grad(y, 0.7, {}); }, x);
    ASSERT_LE(oracle::relative_error(g, fd), kFdTol);
  }
}

TEST(Logistic, PowerIterationRankOne) {
  Dataset d;
  d.rows.push_back({{0}, {1.0}});
  d.labels = {"1"};
  d.d_features = 2;
  const std::vector<std::size_t> rows{0};
  const auto pi = gram_power_iteration(d, rows, 2);
  EXPECT_TRUE(pi.converged);
  EXPECT_NEAR(pi.value, 1.0, 1e-12);

  auto data = std::make_shared<const Dataset>(d);
  LogisticSpec spec;
  spec.data = data;
  spec.class_ids = {0};
  spec.classes = 2;
  spec.d_features = 2;
  spec.worker_samples = {{0}};
  const auto c = LogisticProblem(spec).estimate_constants();
  EXPECT_NEAR(c.L_i[0], 0.5, 1e-12);
  EXPECT_TRUE(c.upper_bound);
  EXPECT_EQ(c.mu, 0.0);
}

TEST(Logistic, PowerIterationMatchesEigen) {
  auto data = toy_dataset(40, 6, 2, 7);
  std::vector<std::size_t> rows(40);
  for (std::size_t s = 0; s < 40; ++s) rows[s] = s;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(6, 6);
  for (std::size_t s : rows) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(6);
    const auto& r = data->rows[s];
    for (std::size_t t = 0; t < r.indices.size(); ++t) a[static_cast<Eigen::Index>(r.indices[t])] = r.values[t];
    gram += a * a.transpose();
  }
  gram /= 40.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  const auto pi = gram_power_iteration(*data, rows, 6, 1000, 1e-14);
  EXPECT_NEAR(pi.value, es.eigenvalues().maxCoeff(), 1e-8 * es.eigenvalues().maxCoeff());
}

TEST(Logistic, ConstantsOrderedAndRegularizerCurvature) {
  const LogisticProblem plain = toy_logistic(40, 5, 2, 4, std::nullopt);
  const LogisticProblem reg = toy_logistic(40, 5, 2, 4, 0.25);
  const auto a = plain.estimate_constants();
  const auto b = reg.estimate_constants();
  EXPECT_LE(a.L, a.L_hat);
  EXPECT_LE(a.L_hat, a.L_max);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(b.L_i[i], a.L_i[i] + 0.5, 1e-12);
}

TEST(Logistic, CurvatureBoundHolds) {
  // The estimated L must dominate observed gradient Lipschitz ratios.
  const LogisticProblem p = toy_logistic(40, 5, 3, 2, 0.1);
  const auto c = p.estimate_constants();
  Rng rng(8);
  for (int k = 0; k < 200; ++k) {
    const DenseVector x = random_point(rng, p.dim());
    const DenseVector y = random_point(rng, p.dim());
    EXPECT_LE(std::sqrt(dist_sq(p.grad(x), p.grad(y))), c.L * std::sqrt(dist_sq(x, y)) * (1 + 1e-9));
  }
}

TEST(Logistic, ReferenceIsStationary) {
  LogisticProblem p = toy_logistic(200, 3, 2, 2, std::nullopt, 3);
  const auto ref = p.compute_opt_reference(1e-8);
  EXPECT_TRUE(ref.usable);
  EXPECT_LE(std::sqrt(norm_sq(p.grad(ref.x_star))), 1e-8);
}

TEST(Logistic, ReferenceCapFlagsUnusable) {
  LogisticProblem p = toy_logistic(20, 3, 2, 2, std::nullopt, 3);
  p.max_reference_iterations = 3;
  EXPECT_FALSE(p.compute_opt_reference(1e-12).usable);
}

TEST(Logistic, StochasticGradientIsUnbiased) {
  const LogisticProblem p = toy_logistic(30, 4, 3, 1, 0.05);
  Rng rng(9);
  const DenseVector x = random_point(rng, p.dim());
  DenseVector exact(p.dim());
  p.grad_i(0, x, exact);
  const std::size_t draws = 10'000;
  DenseVector mean(p.dim(), 0.0), g(p.dim());
  double var = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    Rng r(StreamKey{1, StreamRole::kSample, 0, k});
    p.stochastic_grad_i(0, x, 1, r, g);
    axpy(1.0 / draws, g, mean);
    var += dist_sq(g, exact) / draws;
  }
  EXPECT_LE(std::sqrt(dist_sq(mean, exact)), 3.0 * std::sqrt(var / draws));
}

TEST(Logistic, Errors) {
  auto data = toy_dataset(10, 3, 2, 1);
  const Partition part = partition(10, 2, PartitionStrategy::kContiguous, 0);
  LogisticSpec spec = make_logistic_spec(data, part, std::nullopt);
  LogisticSpec bad_label = spec;
  bad_label.class_ids[0] = 5;
  EXPECT_THROW(LogisticProblem{bad_label}, ConfigError);
  LogisticSpec empty_worker = spec;
  empty_worker.worker_samples[1].clear();
  EXPECT_THROW(LogisticProblem{empty_worker}, ConfigError);
  const LogisticProblem p(spec);
  Rng rng(0);
  DenseVector g(p.dim());
  EXPECT_THROW(p.stochastic_grad_i(0, DenseVector(p.dim()), 0, rng, g), ConfigError);
  EXPECT_THROW(p.stochastic_grad_i(0, DenseVector(p.dim()), (std::size_t{1} << 32) + 1, rng, g),
               ConfigError);
}

TEST(Logistic, SharedPartitionMakesWorkersIdentical) {
  auto data = toy_dataset(15, 3, 2, 4);
  const Partition part = partition(15, 3, PartitionStrategy::kShared, 0);
  const LogisticProblem p(make_logistic_spec(data, part, std::nullopt));
  Rng rng(2);
  const DenseVector x = random_point(rng, p.dim());
  EXPECT_EQ(p.value_i(0, x), p.value_i(2, x));
}

}  // namespace
}  // namespace bicomp
