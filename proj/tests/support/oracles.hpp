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

// Independent reference computations used by the tests. Nothing here calls
// into the code under test except to build inputs.

#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bicomp/problems.hpp"

namespace bicomp::oracle {

/// Central differences with step h.
inline std::vector<double> central_difference(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double keep = x[j];
    x[j] = keep + h;
    const double up = f(x);
    x[j] = keep - h;
    const double down = f(x);
    x[j] = keep;
    g[j] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    num += (a[j] - b[j]) * (a[j] - b[j]);
    den += b[j] * b[j];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

/// Every k-subset of {0..d-1} as a bitmask, by brute force over all masks.
inline std::vector<std::uint32_t> k_subsets(unsigned d, unsigned k) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask)
    if (static_cast<unsigned>(std::popcount(mask)) == k) out.push_back(mask);
  return out;
}

/// E C(x) and E||C(x)-x||^2 of RandK by enumerating every subset.
struct RandKMoments {
  std::vector<double> mean;
  double err_sq = 0.0;
};
inline RandKMoments rand_k_moments(const std::vector<double>& x, unsigned k, double post = 1.0) {
  const unsigned d = static_cast<unsigned>(x.size());
  const auto subsets = k_subsets(d, k);
  RandKMoments m;
  m.mean.assign(d, 0.0);
  for (std::uint32_t mask : subsets) {
    double err = 0.0;
    for (unsigned j = 0; j < d; ++j) {
      const double c = (mask >> j & 1u) ? post * x[j] * d / k : 0.0;
      m.mean[j] += c;
      err += (c - x[j]) * (c - x[j]);
    }
    m.err_sq += err;
  }
  for (double& v : m.mean) v /= static_cast<double>(subsets.size());
  m.err_sq /= static_cast<double>(subsets.size());
  return m;
}

/// Diagonal quadratic workers: A_i = diag(diag[i]), b_i = b[i].
inline QuadraticSpec diagonal_quadratic(const std::vector<std::vector<double>>& diag,
                                        const std::vector<std::vector<double>>& b) {
  QuadraticSpec spec;
  for (std::size_t i = 0; i < diag.size(); ++i) {
    const auto d = static_cast<Eigen::Index>(diag[i].size());
    Eigen::VectorXd v(d);
    Eigen::VectorXd bi(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      v[j] = diag[i][static_cast<std::size_t>(j)];
      bi[j] = b[i][static_cast<std::size_t>(j)];
    }
    spec.A.push_back(v.asDiagonal().toDenseMatrix());
    spec.b.push_back(bi);
  }
  return spec;
}

/// Softmax cross-entropy of one dense sample, evaluated directly (no
/// max-subtraction): -log(exp(s_y) / sum_c exp(s_c)).
inline double softmax_loss(const std::vector<double>& a, std::size_t label,
                           const std::vector<double>& x, std::size_t classes) {
  const std::size_t d = a.size();
  double z = 0.0;
  double sy = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += a[j] * x[c * d + j];
    z += std::exp(s);
    if (c == label) sy = s;
  }
  return -std::log(std::exp(sy) / z);
}

}  // namespace bicomp::oracle
