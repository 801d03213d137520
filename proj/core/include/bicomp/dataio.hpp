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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bicomp {

struct SparseRow {
  std::vector<std::size_t> indices;  // 0-based, strictly increasing
  std::vector<double> values;
  friend bool operator==(const SparseRow&, const SparseRow&) = default;
};

struct Dataset {
  std::vector<SparseRow> rows;
  std::vector<std::string> labels;  // raw label tokens
  std::size_t d_features = 0;

  std::size_t n_samples() const { return rows.size(); }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Parses LIBSVM text ("label idx:val idx:val ..."), 1-based indices.
/// Accepts LF and CRLF; skips blank lines. Throws ParseError.
Dataset parse_libsvm(std::string_view text);
Dataset load_libsvm(const std::filesystem::path& path);
std::string write_libsvm(const Dataset& data);

/// Contiguous class ids assigned by sorted order of the distinct raw labels
/// (numeric order when every label parses as a number).
struct LabelMap {
  std::vector<std::string> classes;
  std::vector<std::size_t> ids;  // per sample
};
LabelMap map_labels(const Dataset& data);

/// Divides every feature by its max absolute value over the dataset.
void scale_max_abs(Dataset& data);

enum class PartitionStrategy { kContiguous, kRoundRobin, kShared };

PartitionStrategy partition_strategy_from_string(std::string_view s);
std::string_view to_string(PartitionStrategy s);

struct Partition {
  PartitionStrategy strategy = PartitionStrategy::kContiguous;
  std::size_t n_workers = 0;
  std::size_t n_samples = 0;
  /// Worker per sample; empty for the shared strategy.
  std::vector<std::size_t> assignment;
  /// Sample indices each worker holds, ascending.
  std::vector<std::vector<std::size_t>> worker_samples;
};

Partition partition(std::size_t n_samples, std::size_t n_workers,
                    PartitionStrategy strategy, std::uint64_t seed);

}  // namespace bicomp
