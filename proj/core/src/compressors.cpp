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

#include "bicomp/compressors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "bicomp/errors.hpp"

namespace bicomp {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

void check_k(std::size_t k, std::size_t d) {
  require(d > 0, "compressor dimension must be positive");
  require(k > 0, "compressor k must be positive");
  require(k <= d, "compressor k=" + std::to_string(k) + " exceeds d=" + std::to_string(d));
}

}  // namespace

CompressorSpec CompressorSpec::top_k(std::size_t k, std::size_t d) {
  check_k(k, d);
  CompressorSpec s;
  s.kind_ = CompressorKind::kTopK;
  s.k_ = k;
  s.d_ = d;
  return s;
}

CompressorSpec CompressorSpec::rand_k(std::size_t k, std::size_t d) {
  check_k(k, d);
  CompressorSpec s;
  s.kind_ = CompressorKind::kRandK;
  s.k_ = k;
  s.d_ = d;
  return s;
}

CompressorSpec CompressorSpec::identity(std::size_t d) {
  require(d > 0, "compressor dimension must be positive");
  CompressorSpec s;
  s.kind_ = CompressorKind::kIdentity;
  s.k_ = d;
  s.d_ = d;
  return s;
}

CompressorSpec CompressorSpec::scale(double c, std::size_t d) {
  require(d > 0, "compressor dimension must be positive");
  require(c > 0.0 && c <= 1.0, "scale compressor needs 0 < c <= 1");
  CompressorSpec s;
  s.kind_ = CompressorKind::kScale;
  s.k_ = d;
  s.d_ = d;
  s.c_ = c;
  return s;
}

CompressorSpec CompressorSpec::scaled_to_contractive(const CompressorSpec& inner) {
  require(inner.is_unbiased(), "scaled_unbiased needs an unbiased inner compressor, got " +
                                   inner.describe());
  CompressorSpec s;
  s.kind_ = CompressorKind::kScaledToContractive;
  s.k_ = inner.k_;
  s.d_ = inner.d_;
  s.c_ = 1.0 / (omega_of(inner) + 1.0);
  s.inner_ = std::make_shared<const CompressorSpec>(inner);
  return s;
}

bool CompressorSpec::is_contractive() const { return kind_ != CompressorKind::kRandK; }

bool CompressorSpec::is_unbiased() const {
  return kind_ == CompressorKind::kRandK || kind_ == CompressorKind::kIdentity;
}

bool CompressorSpec::is_random() const {
  return kind_ == CompressorKind::kRandK ||
         (kind_ == CompressorKind::kScaledToContractive && inner_->is_random());
}

bool CompressorSpec::preserves_values() const {
  return kind_ == CompressorKind::kTopK || kind_ == CompressorKind::kIdentity;
}

std::size_t CompressorSpec::message_size() const { return k_; }

std::string CompressorSpec::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case CompressorKind::kTopK: os << "TopK(k=" << k_ << ", d=" << d_ << ")"; break;
    case CompressorKind::kRandK: os << "RandK(k=" << k_ << ", d=" << d_ << ")"; break;
    case CompressorKind::kIdentity: os << "Identity(d=" << d_ << ")"; break;
    case CompressorKind::kScale: os << "Scale(c=" << c_ << ", d=" << d_ << ")"; break;
    case CompressorKind::kScaledToContractive:
      os << "ScaledToContractive(" << inner_->describe() << ")";
      break;
  }
  return os.str();
}

double alpha_of(const CompressorSpec& spec) {
  switch (spec.kind()) {
    case CompressorKind::kTopK:
      return static_cast<double>(spec.k()) / static_cast<double>(spec.d());
    case CompressorKind::kIdentity: return 1.0;
    case CompressorKind::kScale: {
      const double r = 1.0 - spec.c();
      return 1.0 - r * r;
    }
    case CompressorKind::kScaledToContractive: return spec.c();
    case CompressorKind::kRandK: break;
  }
  throw ConfigError(spec.describe() + " is unbiased, not contractive; it has no alpha "
                    "(wrap it as scaled_unbiased for a contractive slot)");
}

double omega_of(const CompressorSpec& spec) {
  switch (spec.kind()) {
    case CompressorKind::kRandK:
      return static_cast<double>(spec.d()) / static_cast<double>(spec.k()) - 1.0;
    case CompressorKind::kIdentity: return 0.0;
    default: break;
  }
  throw ConfigError(spec.describe() + " is contractive, not unbiased; it has no omega");
}

namespace {

SparseVector top_k(std::span<const double> x, std::size_t k) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Strict total order: larger magnitude first, lower index on ties.
  auto before = [&](std::size_t a, std::size_t b) {
    const double ma = std::abs(x[a]);
    const double mb = std::abs(x[b]);
    return ma != mb ? ma > mb : a < b;
  };
  if (k < x.size()) {
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     idx.end(), before);
    idx.resize(k);
  }
  std::sort(idx.begin(), idx.end());
  SparseVector out;
  out.dim = x.size();
  out.indices = std::move(idx);
  out.values.reserve(k);
  for (std::size_t j : out.indices) out.values.push_back(x[j]);
  return out;
}

SparseVector rand_k(std::span<const double> x, std::size_t k, Rng& rng) {
  const std::size_t d = x.size();
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(d - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  const double scale = static_cast<double>(d) / static_cast<double>(k);
  SparseVector out;
  out.dim = d;
  out.indices = std::move(idx);
  out.values.reserve(k);
  for (std::size_t j : out.indices) out.values.push_back(scale * x[j]);
  return out;
}

}  // namespace

SparseVector compress(const CompressorSpec& spec, std::span<const double> x, Rng& rng) {
  if (x.size() != spec.d())
    throw ConfigError("compressor dimension mismatch: " + spec.describe() +
                      " applied to a vector of size " + std::to_string(x.size()));
  switch (spec.kind()) {
    case CompressorKind::kTopK: return top_k(x, spec.k());
    case CompressorKind::kRandK: return rand_k(x, spec.k(), rng);
    case CompressorKind::kIdentity: return SparseVector::from_dense(x);
    case CompressorKind::kScale: {
      SparseVector out = SparseVector::from_dense(x);
      for (double& v : out.values) v *= spec.c();
      return out;
    }
    case CompressorKind::kScaledToContractive: {
      SparseVector out = compress(*spec.inner(), x, rng);
      const double denom = omega_of(*spec.inner()) + 1.0;
      for (double& v : out.values) v /= denom;
      return out;
    }
  }
  return {};
}

SparseVector CompressorStream::compress(std::span<const double> x,
                                        std::uint64_t round) const {
  Rng rng(StreamKey{seed_, role_, endpoint_, round});
  return bicomp::compress(spec_, x, rng);
}

namespace {

/// Calls visit(subset) for every k-subset of {0..d-1} in lexicographic order.
template <class Visit>
void for_each_subset(std::size_t d, std::size_t k, Visit&& visit) {
  std::vector<std::size_t> s(k);
  std::iota(s.begin(), s.end(), std::size_t{0});
  for (;;) {
    visit(std::span<const std::size_t>(s));
    std::size_t i = k;
    while (i > 0 && s[i - 1] == d - k + (i - 1)) --i;
    if (i == 0) return;
    ++s[i - 1];
    for (std::size_t j = i; j < k; ++j) s[j] = s[j - 1] + 1;
  }
}

struct Moments {
  DenseVector mean;
  double mean_err_sq = 0.0;
};

/// Exact E C(x) and E||C(x) - x||^2 for RandK-based specs by enumeration.
Moments enumerate_rand_k(const CompressorSpec& spec, std::span<const double> x) {
  const CompressorSpec& base =
      spec.kind() == CompressorKind::kScaledToContractive ? *spec.inner() : spec;
  const std::size_t d = base.d();
  const std::size_t k = base.k();
  const double scale = static_cast<double>(d) / static_cast<double>(k);
  const double post = spec.kind() == CompressorKind::kScaledToContractive
                          ? 1.0 / (omega_of(base) + 1.0)
                          : 1.0;
  Moments m;
  m.mean.assign(d, 0.0);
  std::size_t count = 0;
  DenseVector cx(d);
  for_each_subset(d, k, [&](std::span<const std::size_t> subset) {
    std::fill(cx.begin(), cx.end(), 0.0);
    for (std::size_t j : subset) cx[j] = scale * x[j] * post;
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += cx[j];
    m.mean_err_sq += dist_sq(cx, x);
    ++count;
  });
  for (double& v : m.mean) v /= static_cast<double>(count);
  m.mean_err_sq /= static_cast<double>(count);
  return m;
}

}  // namespace

ClassCheckReport empirical_class_check(const CompressorSpec& spec, std::size_t trials,
                                       std::uint64_t seed, std::size_t draws_per_trial) {
  ClassCheckReport report;
  report.trials = trials;
  const std::size_t d = spec.d();
  const bool rand_k_based =
      spec.kind() == CompressorKind::kRandK ||
      (spec.kind() == CompressorKind::kScaledToContractive &&
       spec.inner()->kind() == CompressorKind::kRandK);
  report.exact = !spec.is_random() || (rand_k_based && d <= 12);

  Rng data_rng(StreamKey{seed, StreamRole::kCheck, 0, 0});
  DenseVector x(d);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (double& v : x) v = data_rng.normal();
    const double xx = norm_sq(x);
    if (xx == 0.0) continue;

    Moments m;
    if (!spec.is_random()) {
      Rng unused(0);
      const DenseVector cx = compress(spec, x, unused).to_dense();
      m.mean = cx;
      m.mean_err_sq = dist_sq(cx, x);
    } else if (report.exact) {
      m = enumerate_rand_k(spec, x);
    } else {
      m.mean.assign(d, 0.0);
      for (std::size_t draw = 0; draw < draws_per_trial; ++draw) {
        Rng rng(StreamKey{seed, StreamRole::kCheck, trial + 1, draw});
        const DenseVector cx = compress(spec, x, rng).to_dense();
        for (std::size_t j = 0; j < d; ++j) m.mean[j] += cx[j];
        m.mean_err_sq += dist_sq(cx, x);
      }
      for (double& v : m.mean) v /= static_cast<double>(draws_per_trial);
      m.mean_err_sq /= static_cast<double>(draws_per_trial);
    }
    report.worst_contraction_ratio = std::max(report.worst_contraction_ratio, m.mean_err_sq / xx);
    report.mean_bias_norm =
        std::max(report.mean_bias_norm, std::sqrt(dist_sq(m.mean, x) / xx));
  }
  if (spec.is_unbiased()) {
    const double omega = omega_of(spec);
    if (omega > 0.0) report.variance_ratio = report.worst_contraction_ratio / omega;
  }
  return report;
}

CompressorSpec compressor_from_json(const nlohmann::json& j, std::size_t d) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("compressor: expected an object with a \"kind\" field");
  const std::string kind = j.at("kind").get<std::string>();
  auto need_k = [&]() -> std::size_t {
    if (!j.contains("k")) throw ConfigError("compressor " + kind + ": missing \"k\"");
    const auto k = j.at("k").get<long long>();
    if (k <= 0) throw ConfigError("compressor " + kind + ": k must be positive");
    return static_cast<std::size_t>(k);
  };
  if (kind == "topk") return CompressorSpec::top_k(need_k(), d);
  if (kind == "randk") return CompressorSpec::rand_k(need_k(), d);
  if (kind == "identity") return CompressorSpec::identity(d);
  if (kind == "scale") {
    if (!j.contains("c")) throw ConfigError("compressor scale: missing \"c\"");
    return CompressorSpec::scale(j.at("c").get<double>(), d);
  }
  if (kind == "scaled_unbiased") {
    const CompressorSpec inner = j.contains("k") ? CompressorSpec::rand_k(need_k(), d)
                                                 : CompressorSpec::identity(d);
    return CompressorSpec::scaled_to_contractive(inner);
  }
  throw ConfigError("compressor: unknown kind \"" + kind + "\"");
}

nlohmann::json compressor_to_json(const CompressorSpec& spec) {
  switch (spec.kind()) {
    case CompressorKind::kTopK: return {{"kind", "topk"}, {"k", spec.k()}};
    case CompressorKind::kRandK: return {{"kind", "randk"}, {"k", spec.k()}};
    case CompressorKind::kIdentity: return {{"kind", "identity"}};
    case CompressorKind::kScale: return {{"kind", "scale"}, {"c", spec.c()}};
    case CompressorKind::kScaledToContractive:
      if (spec.inner()->kind() == CompressorKind::kRandK)
        return {{"kind", "scaled_unbiased"}, {"k", spec.k()}};
      return {{"kind", "scaled_unbiased"}};
  }
  return {};
}

}  // namespace bicomp
