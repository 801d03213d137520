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
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bicomp/dataio.hpp"
#include "bicomp/rng.hpp"
#include "bicomp/vector.hpp"

namespace bicomp {

/// Smoothness and convexity constants of f = (1/n) sum_i f_i.
///   L      : f is L-smooth
///   L_i    : f_i is L_i-smooth, L_max = max_i L_i
///   L_hat  : (1/n) sum_i ||grad f_i(x) - grad f_i(y)||^2 <= L_hat^2 ||x-y||^2
///   mu     : f is mu-strongly convex (0 when unknown or not strongly convex)
/// When `upper_bound` is set the values are certified upper bounds (mu is a
/// lower bound) rather than the smallest such numbers.
struct SmoothnessConstants {
  double L = 0.0;
  std::vector<double> L_i;
  double L_max = 0.0;
  double L_hat = 0.0;
  double mu = 0.0;
  bool upper_bound = false;
  /// False when a power iteration hit its iteration cap.
  bool converged = true;
};

struct OptReference {
  DenseVector x_star;
  double f_star = 0.0;
  std::vector<double> grad_norms_at_opt;  // ||grad f_i(x*)||^2 per worker
  double grad_norm = 0.0;                 // ||grad f(x*)||
  std::size_t iterations = 0;
  bool usable = true;

  double mean_grad_norm_sq_at_opt() const;
};

/// Per-worker differentiable oracles. Implementations are immutable after
/// construction and safe to query concurrently.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t n_workers() const = 0;
  virtual std::size_t dim() const = 0;
  virtual double value_i(std::size_t worker, std::span<const double> x) const = 0;
  virtual void grad_i(std::size_t worker, std::span<const double> x,
                      std::span<double> out) const = 0;
  /// Unbiased estimate of grad f_i(x) averaged over `batch_size` draws.
  virtual void stochastic_grad_i(std::size_t worker, std::span<const double> x,
                                 std::size_t batch_size, Rng& rng,
                                 std::span<double> out) const = 0;
  virtual SmoothnessConstants estimate_constants() const = 0;
  virtual OptReference compute_opt_reference(double tolerance) const = 0;

  /// (1/n) sum_i f_i(x), summed in worker order.
  double value(std::span<const double> x) const;
  /// (1/n) sum_i grad f_i(x), summed in worker order.
  void grad(std::span<const double> x, std::span<double> out) const;
  DenseVector grad(std::span<const double> x) const;

 protected:
  void check_dim(std::span<const double> x) const;
};

// ---------------------------------------------------------------------------
// Quadratics: f_i(x) = 1/2 x^T A_i x - b_i^T x

struct QuadraticSpec {
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::VectorXd> b;
  /// Standard deviation of the additive Gaussian noise of stochastic
  /// gradients: E||noise||^2 = noise_sigma^2 / batch.
  double noise_sigma = 0.0;
};

class QuadraticProblem final : public Problem {
 public:
  explicit QuadraticProblem(QuadraticSpec spec);

  std::size_t n_workers() const override { return spec_.A.size(); }
  std::size_t dim() const override { return dim_; }
  double value_i(std::size_t worker, std::span<const double> x) const override;
  void grad_i(std::size_t worker, std::span<const double> x,
              std::span<double> out) const override;
  void stochastic_grad_i(std::size_t worker, std::span<const double> x,
                         std::size_t batch_size, Rng& rng,
                         std::span<double> out) const override;
  /// Exact constants by eigendecomposition.
  SmoothnessConstants estimate_constants() const override;
  /// Direct solve of A_bar x = b_bar.
  OptReference compute_opt_reference(double tolerance) const override;

  const QuadraticSpec& spec() const { return spec_; }
  double noise_sigma() const { return spec_.noise_sigma; }

 private:
  QuadraticSpec spec_;
  std::size_t dim_ = 0;
};

std::unique_ptr<QuadraticProblem> quadratic_problem(QuadraticSpec spec);

struct RandomQuadraticOptions {
  std::size_t n_workers = 10;
  std::size_t dim = 10;
  /// Eigenvalues of each A_i are drawn uniformly from [eig_min, eig_max].
  double eig_min = 1.0;
  double eig_max = 2.0;
  double b_scale = 1.0;
  /// b_i = A_i x_hat for a shared x_hat, so grad f_i(x*) = 0 for all i.
  bool interpolation = false;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Each worker gets a random rotation of a random spectrum.
QuadraticSpec random_quadratic(const RandomQuadraticOptions& options);

// ---------------------------------------------------------------------------
// Multiclass softmax logistic regression with an optional nonconvex penalty
// r(x) = lambda * sum_j x_j^2 / (1 + x_j^2).

/// Returns r(x) and adds grad r(x) into `grad_out` when non-empty.
double nonconvex_reg_value_grad(std::span<const double> x, double lambda,
                                std::span<double> grad_out);

struct LogisticSpec {
  std::shared_ptr<const Dataset> data;
  std::vector<std::size_t> class_ids;  // per sample, in [0, classes)
  std::size_t classes = 2;
  std::size_t d_features = 0;          // >= data->d_features
  std::vector<std::vector<std::size_t>> worker_samples;
  std::optional<double> lambda;        // nonconvex regularizer weight
};

class LogisticProblem final : public Problem {
 public:
  explicit LogisticProblem(LogisticSpec spec);

  std::size_t n_workers() const override { return spec_.worker_samples.size(); }
  /// classes * d_features; coordinates are class-major blocks x_0, x_1, ...
  std::size_t dim() const override { return spec_.classes * spec_.d_features; }
  double value_i(std::size_t worker, std::span<const double> x) const override;
  void grad_i(std::size_t worker, std::span<const double> x,
              std::span<double> out) const override;
  void stochastic_grad_i(std::size_t worker, std::span<const double> x,
                         std::size_t batch_size, Rng& rng,
                         std::span<double> out) const override;
  /// Upper bounds: L_i <= lambda_max(A_i^T A_i) / (2 m_i) + 2 lambda via power
  /// iteration, L <= mean L_i, L_hat <= sqrt(mean L_i^2), mu = 0.
  SmoothnessConstants estimate_constants() const override;
  /// Gradient descent with step 1/L until ||grad f|| <= tolerance.
  OptReference compute_opt_reference(double tolerance) const override;

  /// Worker objective and gradient; `grad_out` may be empty.
  double logreg_value_grad(std::size_t worker, std::span<const double> x,
                           std::span<double> grad_out) const;

  const LogisticSpec& spec() const { return spec_; }
  std::size_t samples(std::size_t worker) const {
    return spec_.worker_samples.at(worker).size();
  }

  /// Iteration cap of compute_opt_reference.
  std::size_t max_reference_iterations = 1'000'000;

 private:
  /// Adds (1/scale) * grad of sample s's loss into out; returns the loss.
  double sample_loss_grad(std::size_t sample, std::span<const double> x,
                          std::span<double> out, double scale,
                          std::vector<double>& scores) const;

  LogisticSpec spec_;
};

std::unique_ptr<LogisticProblem> logistic_problem(LogisticSpec spec);

/// Builds a LogisticSpec from a dataset and a partition.
LogisticSpec make_logistic_spec(std::shared_ptr<const Dataset> data,
                                const Partition& part,
                                std::optional<double> lambda,
                                std::size_t min_classes = 2,
                                std::size_t d_features_override = 0);

struct SyntheticLogisticOptions {
  std::size_t samples = 100;
  std::size_t features = 10;
  std::size_t classes = 2;
  /// Probability that a label is replaced by a uniformly random class; keeps
  /// the data non-separable so a minimizer exists.
  double label_noise = 0.2;
  /// Fraction of nonzero features per row (1 = dense).
  double density = 1.0;
  std::uint64_t seed = 0;
};

/// Gaussian features, labels from a random linear teacher plus label noise.
Dataset synthetic_logistic_dataset(const SyntheticLogisticOptions& options);

/// Largest eigenvalue of (1/m) sum_s a_s a_s^T over the given rows.
struct PowerIterationResult {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};
PowerIterationResult gram_power_iteration(const Dataset& data,
                                          std::span<const std::size_t> rows,
                                          std::size_t d_features,
                                          std::size_t max_iterations = 100,
                                          double tolerance = 1e-8);

/// Sample variance of a stochastic gradient estimator around the exact
/// gradient: (1/draws) sum ||g_k - grad f_i(x)||^2.
double estimate_gradient_variance(const Problem& problem, std::size_t worker,
                                  std::span<const double> x,
                                  std::size_t batch_size, std::size_t draws,
                                  std::uint64_t seed);

}  // namespace bicomp
