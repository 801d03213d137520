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
#include <string>

#include <nlohmann/json.hpp>

#include "bicomp/rng.hpp"
#include "bicomp/vector.hpp"

namespace bicomp {

enum class CompressorKind { kTopK, kRandK, kIdentity, kScale, kScaledToContractive };

/// Immutable description of a compression operator on R^d together with the
/// class it is declared to belong to:
///
///   contractive B(alpha): E||C(x) - x||^2 <= (1 - alpha) ||x||^2
///   unbiased    U(omega): E C(x) = x,  E||C(x) - x||^2 <= omega ||x||^2
///
/// TopK is B(k/d), RandK is U(d/k - 1), Identity is both B(1) and U(0),
/// Scale(c) is B(1 - (1-c)^2) and C/(omega+1) for C in U(omega) is
/// B(1/(omega+1)).
class CompressorSpec {
 public:
  static CompressorSpec top_k(std::size_t k, std::size_t d);
  static CompressorSpec rand_k(std::size_t k, std::size_t d);
  static CompressorSpec identity(std::size_t d);
  static CompressorSpec scale(double c, std::size_t d);
  static CompressorSpec scaled_to_contractive(const CompressorSpec& inner);

  CompressorKind kind() const { return kind_; }
  std::size_t k() const { return k_; }
  std::size_t d() const { return d_; }
  double c() const { return c_; }
  const CompressorSpec* inner() const { return inner_.get(); }

  bool is_contractive() const;
  bool is_unbiased() const;
  bool is_random() const;
  /// True when every stored output value equals the corresponding input
  /// coordinate exactly (Identity, TopK).
  bool preserves_values() const;
  /// Stored coordinates of every output message.
  std::size_t message_size() const;
  std::string describe() const;

 private:
  CompressorSpec() = default;

  CompressorKind kind_ = CompressorKind::kIdentity;
  std::size_t k_ = 0;
  std::size_t d_ = 0;
  double c_ = 1.0;
  std::shared_ptr<const CompressorSpec> inner_;
};

/// Contractive parameter; throws ConfigError for a purely unbiased spec.
double alpha_of(const CompressorSpec& spec);
/// Variance parameter; throws ConfigError for a purely contractive spec.
double omega_of(const CompressorSpec& spec);

SparseVector compress(const CompressorSpec& spec, std::span<const double> x,
                      Rng& rng);

/// A spec bound to one endpoint of one run. Draw t is seeded by
/// (run seed, role, endpoint, t), so `compress(x, t)` is a pure function.
class CompressorStream {
 public:
  CompressorStream(CompressorSpec spec, std::uint64_t seed, StreamRole role,
                   std::uint64_t endpoint)
      : spec_(std::move(spec)), seed_(seed), role_(role), endpoint_(endpoint) {}

  const CompressorSpec& spec() const { return spec_; }
  SparseVector compress(std::span<const double> x, std::uint64_t round) const;

 private:
  CompressorSpec spec_;
  std::uint64_t seed_;
  StreamRole role_;
  std::uint64_t endpoint_;
};

struct ClassCheckReport {
  /// Largest observed E||C(x)-x||^2 / ||x||^2 over the trial vectors.
  double worst_contraction_ratio = 0.0;
  /// Largest observed ||E C(x) - x|| / ||x||.
  double mean_bias_norm = 0.0;
  /// worst_contraction_ratio / omega; empty for contractive-only specs and
  /// for omega = 0.
  std::optional<double> variance_ratio;
  bool exact = false;  // expectations by enumeration rather than sampling
  std::size_t trials = 0;
};

/// Monte-Carlo check of the declared class. RandK with d <= 12 (and its
/// scaled variant) is enumerated exactly over all C(d, k) subsets.
ClassCheckReport empirical_class_check(const CompressorSpec& spec,
                                       std::size_t trials, std::uint64_t seed,
                                       std::size_t draws_per_trial = 2000);

/// {"kind":"topk"|"randk"|"identity"|"scale"|"scaled_unbiased","k":int,"c":float}
CompressorSpec compressor_from_json(const nlohmann::json& j, std::size_t d);
nlohmann::json compressor_to_json(const CompressorSpec& spec);

}  // namespace bicomp
