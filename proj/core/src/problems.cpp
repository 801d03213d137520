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

#include "bicomp/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bicomp/errors.hpp"

namespace bicomp {

double OptReference::mean_grad_norm_sq_at_opt() const {
  if (grad_norms_at_opt.empty()) return 0.0;
  double acc = 0.0;
  for (double v : grad_norms_at_opt) acc += v;
  return acc / static_cast<double>(grad_norms_at_opt.size());
}

void Problem::check_dim(std::span<const double> x) const {
  if (x.size() != dim())
    throw ConfigError("point has dimension " + std::to_string(x.size()) +
                      ", problem expects " + std::to_string(dim()));
}

double Problem::value(std::span<const double> x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < n_workers(); ++i) acc += value_i(i, x);
  return acc / static_cast<double>(n_workers());
}

void Problem::grad(std::span<const double> x, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  DenseVector g(dim());
  for (std::size_t i = 0; i < n_workers(); ++i) {
    grad_i(i, x, g);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += g[j];
  }
  const double n = static_cast<double>(n_workers());
  for (double& v : out) v /= n;
}

DenseVector Problem::grad(std::span<const double> x) const {
  DenseVector out(dim());
  grad(x, out);
  return out;
}

// ---------------------------------------------------------------------------
// Quadratics

namespace {

using ConstMap = Eigen::Map<const Eigen::VectorXd>;
using Map = Eigen::Map<Eigen::VectorXd>;

ConstMap as_eigen(std::span<const double> x) {
  return ConstMap(x.data(), static_cast<Eigen::Index>(x.size()));
}

Map as_eigen(std::span<double> x) {
  return Map(x.data(), static_cast<Eigen::Index>(x.size()));
}

double max_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double min_eig(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd mean_matrix(const std::vector<Eigen::MatrixXd>& ms) {
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(ms.front().rows(), ms.front().cols());
  for (const auto& m : ms) acc += m;
  return acc / static_cast<double>(ms.size());
}

}  // namespace

QuadraticProblem::QuadraticProblem(QuadraticSpec spec) : spec_(std::move(spec)) {
  if (spec_.A.empty()) throw ConfigError("quadratic: at least one worker matrix required");
  if (spec_.b.size() != spec_.A.size())
    throw ConfigError("quadratic: need one b_i per A_i");
  dim_ = static_cast<std::size_t>(spec_.A.front().rows());
  if (dim_ == 0) throw ConfigError("quadratic: empty matrices");
  for (std::size_t i = 0; i < spec_.A.size(); ++i) {
    const auto& A = spec_.A[i];
    if (static_cast<std::size_t>(A.rows()) != dim_ || static_cast<std::size_t>(A.cols()) != dim_ ||
        static_cast<std::size_t>(spec_.b[i].size()) != dim_)
      throw ConfigError("quadratic: worker " + std::to_string(i) + " has mismatched dimensions");
    const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ConfigError("quadratic: A_" + std::to_string(i) + " is not symmetric");
    if (min_eig(A) < -1e-10 * scale)
      throw ConfigError("quadratic: A_" + std::to_string(i) + " is not positive semidefinite");
  }
  if (spec_.noise_sigma < 0.0) throw ConfigError("quadratic: noise_sigma must be >= 0");
}

double QuadraticProblem::value_i(std::size_t worker, std::span<const double> x) const {
  check_dim(x);
  const auto xv = as_eigen(x);
  return 0.5 * xv.dot(spec_.A[worker] * xv) - spec_.b[worker].dot(xv);
}

void QuadraticProblem::grad_i(std::size_t worker, std::span<const double> x,
                              std::span<double> out) const {
  check_dim(x);
  as_eigen(out) = spec_.A[worker] * as_eigen(x) - spec_.b[worker];
}

void QuadraticProblem::stochastic_grad_i(std::size_t worker, std::span<const double> x,
                                         std::size_t batch_size, Rng& rng,
                                         std::span<double> out) const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  grad_i(worker, x, out);
  if (spec_.noise_sigma == 0.0) return;
  const double sd = spec_.noise_sigma /
                    std::sqrt(static_cast<double>(dim_) * static_cast<double>(batch_size));
  for (double& v : out) v += sd * rng.normal();
}

SmoothnessConstants QuadraticProblem::estimate_constants() const {
  SmoothnessConstants c;
  c.L_i.reserve(spec_.A.size());
  std::vector<Eigen::MatrixXd> squares;
  squares.reserve(spec_.A.size());
  for (const auto& A : spec_.A) {
    c.L_i.push_back(std::max(0.0, max_eig(A)));
    squares.push_back(A * A);
  }
  c.L_max = *std::max_element(c.L_i.begin(), c.L_i.end());
  const Eigen::MatrixXd A_bar = mean_matrix(spec_.A);
  c.L = std::max(0.0, max_eig(A_bar));
  c.L_hat = std::sqrt(std::max(0.0, max_eig(mean_matrix(squares))));
  c.mu = std::max(0.0, min_eig(A_bar));
  c.upper_bound = false;
  return c;
}

OptReference QuadraticProblem::compute_opt_reference(double /*tolerance*/) const {
  const Eigen::MatrixXd A_bar = mean_matrix(spec_.A);
  Eigen::VectorXd b_bar = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& b : spec_.b) b_bar += b;
  b_bar /= static_cast<double>(spec_.b.size());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A_bar, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 1e-12 * std::max(hi, 1e-300)))
    throw ConfigError("quadratic: mean matrix is singular; no unique minimizer");

  OptReference ref;
  const Eigen::VectorXd xs = A_bar.ldlt().solve(b_bar);
  ref.x_star.assign(xs.data(), xs.data() + xs.size());
  ref.f_star = value(ref.x_star);
  DenseVector g(dim_);
  for (std::size_t i = 0; i < n_workers(); ++i) {
    grad_i(i, ref.x_star, g);
    ref.grad_norms_at_opt.push_back(norm_sq(g));
  }
  ref.grad_norm = std::sqrt(norm_sq(grad(ref.x_star)));
  return ref;
}

std::unique_ptr<QuadraticProblem> quadratic_problem(QuadraticSpec spec) {
  return std::make_unique<QuadraticProblem>(std::move(spec));
}

QuadraticSpec random_quadratic(const RandomQuadraticOptions& o) {
  if (o.n_workers == 0 || o.dim == 0) throw ConfigError("random quadratic: empty shape");
  if (!(o.eig_min >= 0.0 && o.eig_max >= o.eig_min))
    throw ConfigError("random quadratic: need 0 <= eig_min <= eig_max");
  Rng rng(StreamKey{o.seed, StreamRole::kData, 1, 0});
  const auto d = static_cast<Eigen::Index>(o.dim);
  QuadraticSpec spec;
  spec.noise_sigma = o.noise_sigma;
  Eigen::VectorXd x_hat(d);
  for (Eigen::Index j = 0; j < d; ++j) x_hat[j] = rng.normal();
  for (std::size_t i = 0; i < o.n_workers; ++i) {
    Eigen::MatrixXd g(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) g(r, c) = rng.normal();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Eigen::VectorXd eig(d);
    for (Eigen::Index j = 0; j < d; ++j)
      eig[j] = o.eig_min + (o.eig_max - o.eig_min) * rng.uniform01();
    Eigen::MatrixXd A = q * eig.asDiagonal() * q.transpose();
    A = 0.5 * (A + A.transpose());
    Eigen::VectorXd b(d);
    if (o.interpolation) {
      b = A * x_hat;
    } else {
      for (Eigen::Index j = 0; j < d; ++j) b[j] = o.b_scale * rng.normal();
    }
    spec.A.push_back(std::move(A));
    spec.b.push_back(std::move(b));
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Logistic regression

double nonconvex_reg_value_grad(std::span<const double> x, double lambda,
                                std::span<double> grad_out) {
  double value = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double t = x[j];
    const double q = 1.0 + t * t;
    value += t * t / q;
    if (!grad_out.empty()) grad_out[j] += lambda * 2.0 * t / (q * q);
  }
  return lambda * value;
}

LogisticProblem::LogisticProblem(LogisticSpec spec) : spec_(std::move(spec)) {
  if (!spec_.data) throw ConfigError("logreg: no dataset");
  if (spec_.classes < 2) throw ConfigError("logreg: need at least 2 classes");
  if (spec_.d_features < spec_.data->d_features)
    throw ConfigError("logreg: d_features smaller than the dataset's feature count");
  if (spec_.d_features == 0) throw ConfigError("logreg: dataset has no features");
  if (spec_.class_ids.size() != spec_.data->n_samples())
    throw ConfigError("logreg: need one class id per sample");
  for (std::size_t id : spec_.class_ids)
    if (id >= spec_.classes)
      throw ConfigError("logreg: label id " + std::to_string(id) + " outside [0, " +
                        std::to_string(spec_.classes) + ")");
  if (spec_.worker_samples.empty()) throw ConfigError("logreg: no workers");
  for (std::size_t i = 0; i < spec_.worker_samples.size(); ++i) {
    if (spec_.worker_samples[i].empty())
      throw ConfigError("logreg: worker " + std::to_string(i) + " has an empty sample block");
    for (std::size_t s : spec_.worker_samples[i])
      if (s >= spec_.data->n_samples()) throw ConfigError("logreg: sample index out of range");
  }
  if (spec_.lambda && *spec_.lambda < 0.0) throw ConfigError("logreg: lambda must be >= 0");
}

double LogisticProblem::sample_loss_grad(std::size_t sample, std::span<const double> x,
                                         std::span<double> out, double scale,
                                         std::vector<double>& scores) const {
  const SparseRow& row = spec_.data->rows[sample];
  const std::size_t d = spec_.d_features;
  const std::size_t c = spec_.classes;
  const std::size_t label = spec_.class_ids[sample];
  scores.assign(c, 0.0);
  for (std::size_t y = 0; y < c; ++y) {
    const double* block = x.data() + y * d;
    double s = 0.0;
    for (std::size_t t = 0; t < row.indices.size(); ++t) s += row.values[t] * block[row.indices[t]];
    scores[y] = s;
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - top);
  const double lse = top + std::log(z);
  const double loss = lse - scores[label];
  if (!out.empty()) {
    for (std::size_t y = 0; y < c; ++y) {
      const double p = std::exp(scores[y] - lse);
      const double coef = (p - (y == label ? 1.0 : 0.0)) / scale;
      double* block = out.data() + y * d;
      for (std::size_t t = 0; t < row.indices.size(); ++t)
        block[row.indices[t]] += coef * row.values[t];
    }
  }
  return loss;
}

double LogisticProblem::logreg_value_grad(std::size_t worker, std::span<const double> x,
                                          std::span<double> grad_out) const {
  check_dim(x);
  const auto& samples = spec_.worker_samples.at(worker);
  const double m = static_cast<double>(samples.size());
  if (!grad_out.empty()) std::fill(grad_out.begin(), grad_out.end(), 0.0);
  std::vector<double> scores;
  double loss = 0.0;
  for (std::size_t s : samples) loss += sample_loss_grad(s, x, grad_out, m, scores);
  double value = loss / m;
  if (spec_.lambda) value += nonconvex_reg_value_grad(x, *spec_.lambda, grad_out);
  return value;
}

double LogisticProblem::value_i(std::size_t worker, std::span<const double> x) const {
  return logreg_value_grad(worker, x, {});
}

void LogisticProblem::grad_i(std::size_t worker, std::span<const double> x,
                             std::span<double> out) const {
  logreg_value_grad(worker, x, out);
}

void LogisticProblem::stochastic_grad_i(std::size_t worker, std::span<const double> x,
                                        std::size_t batch_size, Rng& rng,
                                        std::span<double> out) const {
  check_dim(x);
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (batch_size > (std::size_t{1} << 32)) throw ConfigError("batch_size exceeds 2^32");
  const auto& samples = spec_.worker_samples.at(worker);
  std::fill(out.begin(), out.end(), 0.0);
  std::vector<double> scores;
  const double b = static_cast<double>(batch_size);
  for (std::size_t draw = 0; draw < batch_size; ++draw) {
    const std::size_t s = samples[static_cast<std::size_t>(rng.uniform_index(samples.size()))];
    sample_loss_grad(s, x, out, b, scores);
  }
  if (spec_.lambda) nonconvex_reg_value_grad(x, *spec_.lambda, out);
}

PowerIterationResult gram_power_iteration(const Dataset& data,
                                          std::span<const std::size_t> rows,
                                          std::size_t d_features,
                                          std::size_t max_iterations, double tolerance) {
  PowerIterationResult res;
  if (rows.empty() || d_features == 0) {
    res.converged = true;
    return res;
  }
  Rng rng(StreamKey{0x5eed, StreamRole::kCheck, 7, 0});
  DenseVector v(d_features);
  for (double& e : v) e = 1.0 + 0.5 * rng.uniform01();
  double nv = std::sqrt(norm_sq(v));
  for (double& e : v) e /= nv;
  const double m = static_cast<double>(rows.size());
  DenseVector w(d_features);
  double previous = 0.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t s : rows) {
      const SparseRow& row = data.rows[s];
      double proj = 0.0;
      for (std::size_t t = 0; t < row.indices.size(); ++t) proj += row.values[t] * v[row.indices[t]];
      for (std::size_t t = 0; t < row.indices.size(); ++t) w[row.indices[t]] += proj * row.values[t];
    }
    for (double& e : w) e /= m;
    const double rayleigh = dot(v, w);
    const double nw = std::sqrt(norm_sq(w));
    res.value = rayleigh;
    res.iterations = it;
    if (nw == 0.0) {
      res.converged = true;
      return res;
    }
    for (std::size_t j = 0; j < d_features; ++j) v[j] = w[j] / nw;
    if (it > 1 && std::abs(rayleigh - previous) <= tolerance * std::abs(rayleigh)) {
      res.converged = true;
      return res;
    }
    previous = rayleigh;
  }
  return res;
}

SmoothnessConstants LogisticProblem::estimate_constants() const {
  SmoothnessConstants c;
  c.upper_bound = true;
  const double reg = spec_.lambda ? 2.0 * *spec_.lambda : 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& rows : spec_.worker_samples) {
    const auto pi = gram_power_iteration(*spec_.data, rows, spec_.d_features);
    c.converged = c.converged && pi.converged;
    const double Li = 0.5 * pi.value + reg;
    c.L_i.push_back(Li);
    sum += Li;
    sum_sq += Li * Li;
  }
  const double n = static_cast<double>(c.L_i.size());
  c.L_max = *std::max_element(c.L_i.begin(), c.L_i.end());
  c.L = sum / n;
  c.L_hat = std::sqrt(sum_sq / n);
  // mean <= RMS <= max up to rounding; pin the ordering exactly.
  c.L_hat = std::clamp(c.L_hat, c.L, c.L_max);
  c.mu = 0.0;
  return c;
}

OptReference LogisticProblem::compute_opt_reference(double tolerance) const {
  const SmoothnessConstants c = estimate_constants();
  if (!(c.L > 0.0)) throw ConfigError("logreg: zero smoothness constant");
  const double gamma = 1.0 / c.L;
  OptReference ref;
  ref.x_star.assign(dim(), 0.0);
  DenseVector g(dim());
  ref.usable = false;
  for (std::size_t it = 0; it <= max_reference_iterations; ++it) {
    grad(ref.x_star, g);
    const double gn = std::sqrt(norm_sq(g));
    ref.grad_norm = gn;
    ref.iterations = it;
    if (gn <= tolerance) {
      ref.usable = true;
      break;
    }
    if (it == max_reference_iterations) break;
    gradient_step(ref.x_star, gamma, g);
  }
  ref.f_star = value(ref.x_star);
  for (std::size_t i = 0; i < n_workers(); ++i) {
    grad_i(i, ref.x_star, g);
    ref.grad_norms_at_opt.push_back(norm_sq(g));
  }
  return ref;
}

std::unique_ptr<LogisticProblem> logistic_problem(LogisticSpec spec) {
  return std::make_unique<LogisticProblem>(std::move(spec));
}

LogisticSpec make_logistic_spec(std::shared_ptr<const Dataset> data, const Partition& part,
                                std::optional<double> lambda, std::size_t min_classes,
                                std::size_t d_features_override) {
  if (!data) throw ConfigError("logreg: no dataset");
  if (part.n_samples != data->n_samples())
    throw ConfigError("logreg: partition does not match the dataset size");
  LogisticSpec spec;
  const LabelMap labels = map_labels(*data);
  spec.class_ids = labels.ids;
  spec.classes = std::max(min_classes, labels.classes.size());
  spec.d_features = std::max(data->d_features, d_features_override);
  spec.worker_samples = part.worker_samples;
  spec.lambda = lambda;
  spec.data = std::move(data);
  return spec;
}

Dataset synthetic_logistic_dataset(const SyntheticLogisticOptions& o) {
  if (o.samples == 0 || o.features == 0 || o.classes < 2)
    throw ConfigError("synthetic logreg: need samples, features >= 1 and classes >= 2");
  Rng rng(StreamKey{o.seed, StreamRole::kData, 2, 0});
  std::vector<double> teacher(o.classes * o.features);
  for (double& v : teacher) v = rng.normal();
  Dataset data;
  data.d_features = o.features;
  std::vector<double> dense(o.features);
  for (std::size_t s = 0; s < o.samples; ++s) {
    SparseRow row;
    for (std::size_t f = 0; f < o.features; ++f) {
      dense[f] = 0.0;
      if (o.density >= 1.0 || rng.uniform01() < o.density) {
        dense[f] = rng.normal();
        row.indices.push_back(f);
        row.values.push_back(dense[f]);
      }
    }
    if (row.indices.empty()) {
      const std::size_t f = static_cast<std::size_t>(rng.uniform_index(o.features));
      dense[f] = rng.normal();
      row.indices.push_back(f);
      row.values.push_back(dense[f]);
    }
    std::size_t label = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < o.classes; ++y) {
      double sc = 0.0;
      for (std::size_t f = 0; f < o.features; ++f) sc += teacher[y * o.features + f] * dense[f];
      if (sc > best) {
        best = sc;
        label = y;
      }
    }
    if (rng.uniform01() < o.label_noise)
      label = static_cast<std::size_t>(rng.uniform_index(o.classes));
    data.labels.push_back(std::to_string(label));
    data.rows.push_back(std::move(row));
  }
  return data;
}

double estimate_gradient_variance(const Problem& problem, std::size_t worker,
                                  std::span<const double> x, std::size_t batch_size,
                                  std::size_t draws, std::uint64_t seed) {
  DenseVector exact(problem.dim());
  problem.grad_i(worker, x, exact);
  DenseVector g(problem.dim());
  double acc = 0.0;
  for (std::size_t k = 0; k < draws; ++k) {
    Rng rng(StreamKey{seed, StreamRole::kSample, worker, k});
    problem.stochastic_grad_i(worker, x, batch_size, rng, g);
    acc += dist_sq(g, exact);
  }
  return draws == 0 ? 0.0 : acc / static_cast<double>(draws);
}

}  // namespace bicomp
