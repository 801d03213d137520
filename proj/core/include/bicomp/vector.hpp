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
#include <span>
#include <vector>

namespace bicomp {

using DenseVector = std::vector<double>;

/// Sorted (index, value) pairs. A message costs `stored()` coordinates on the
/// wire regardless of whether a stored value happens to be zero.
struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::size_t> indices;
  std::vector<double> values;

  std::size_t stored() const { return indices.size(); }
  DenseVector to_dense() const;
  static SparseVector from_dense(std::span<const double> x);

  /// out[idx] += scale * value, in index order.
  void add_to(std::span<double> out, double scale = 1.0) const;
  /// out[idx] = value.
  void assign_to(std::span<double> out) const;

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm_sq(std::span<const double> x);
double dist_sq(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
bool all_finite(std::span<const double> x);

/// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

/// x -= gamma * g, coordinate-wise. Every algorithm steps through this.
void gradient_step(std::span<double> x, double gamma, std::span<const double> g);

/// out = (sum_i parts[i]) / n with a fixed left-to-right summation order.
void mean_into(std::span<const DenseVector> parts, std::span<double> out);
void mean_into(std::span<const SparseVector> parts, std::span<double> out);

}  // namespace bicomp
