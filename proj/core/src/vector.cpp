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

#include "bicomp/vector.hpp"

#include <algorithm>
#include <cmath>

namespace bicomp {

DenseVector SparseVector::to_dense() const {
  DenseVector out(dim, 0.0);
  assign_to(out);
  return out;
}

SparseVector SparseVector::from_dense(std::span<const double> x) {
  SparseVector s;
  s.dim = x.size();
  s.indices.resize(x.size());
  s.values.assign(x.begin(), x.end());
  for (std::size_t j = 0; j < x.size(); ++j) s.indices[j] = j;
  return s;
}

void SparseVector::add_to(std::span<double> out, double scale) const {
  if (scale == 1.0) {
    for (std::size_t s = 0; s < indices.size(); ++s) out[indices[s]] += values[s];
  } else {
    for (std::size_t s = 0; s < indices.size(); ++s)
      out[indices[s]] += scale * values[s];
  }
}

void SparseVector::assign_to(std::span<double> out) const {
  for (std::size_t s = 0; s < indices.size(); ++s) out[indices[s]] = values[s];
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += a[j] * b[j];
  return acc;
}

double norm_sq(std::span<const double> x) { return dot(x, x); }

double dist_sq(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    acc += d * d;
  }
  return acc;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a[j] - b[j]));
  return m;
}

bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += a * x[j];
}

void gradient_step(std::span<double> x, double gamma, std::span<const double> g) {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] -= gamma * g[j];
}

void mean_into(std::span<const DenseVector> parts, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& p : parts)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += p[j];
  const double n = static_cast<double>(parts.size());
  for (double& v : out) v /= n;
}

void mean_into(std::span<const SparseVector> parts, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& p : parts) p.add_to(out);
  const double n = static_cast<double>(parts.size());
  for (double& v : out) v /= n;
}

}  // namespace bicomp
