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

#include <set>
#include <string>

#include <gtest/gtest.h>

#include "bicomp/dataio.hpp"
#include "bicomp/errors.hpp"
#include "bicomp/rng.hpp"

namespace bicomp {
namespace {

TEST(ParseLibsvm, OneBasedToZeroBased) {
  const Dataset d = parse_libsvm("1 3:0.5 7:-2\n");
  ASSERT_EQ(d.n_samples(), 1u);
  EXPECT_EQ(d.labels[0], "1");
  EXPECT_EQ(d.rows[0].indices, (std::vector<std::size_t>{2, 6}));
  EXPECT_EQ(d.rows[0].values, (std::vector<double>{0.5, -2.0}));
  EXPECT_EQ(d.d_features, 7u);
}

TEST(ParseLibsvm, EmptyInput) {
  const Dataset d = parse_libsvm("");
  EXPECT_EQ(d.n_samples(), 0u);
  EXPECT_EQ(d.d_features, 0u);
}

TEST(ParseLibsvm, BlankLinesAndLineEndings) {
  const Dataset unix_style = parse_libsvm("+1 1:1 2:2\n\n-1 2:3\n");
  const Dataset dos_style = parse_libsvm("+1 1:1 2:2\r\n\r\n-1 2:3\r\n");
  EXPECT_EQ(unix_style, dos_style);
  EXPECT_EQ(unix_style.n_samples(), 2u);
}

TEST(ParseLibsvm, LabelOnlyRow) {
  const Dataset d = parse_libsvm("3\n");
  ASSERT_EQ(d.n_samples(), 1u);
  EXPECT_TRUE(d.rows[0].indices.empty());
}

void expect_error_on_line(const std::string& text, std::size_t line) {
  try {
    parse_libsvm(text);
    FAIL() << "expected a parse error for: " << text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
  }
}

TEST(ParseLibsvm, ErrorsCarryLineNumbers) {
  expect_error_on_line("1 1:1\n1 2-3\n", 2);
  expect_error_on_line("1 1:x\n", 1);
  expect_error_on_line("1 1:1\n\n1 3:1 2:1\n", 3);
  expect_error_on_line("1 0:1\n", 1);
  expect_error_on_line("1 2:1 2:1\n", 1);
  expect_error_on_line("1 :1\n", 1);
  expect_error_on_line("1 1:\n", 1);
}

TEST(ParseLibsvm, RoundTripOracle) {
  Rng rng(4);
  Dataset d;
  for (int s = 0; s < 50; ++s) {
    SparseRow row;
    for (std::size_t j = 0; j < 30; ++j)
      if (rng.uniform01() < 0.3) {
        row.indices.push_back(j);
        row.values.push_back(rng.normal() * 1e3);
      }
    if (!row.indices.empty()) d.d_features = std::max(d.d_features, row.indices.back() + 1);
    d.rows.push_back(row);
    d.labels.push_back(std::to_string(rng.uniform_index(3)));
  }
  EXPECT_EQ(parse_libsvm(write_libsvm(d)), d);
}

TEST(ParseLibsvm, MissingFileIsConfigError) {
  EXPECT_THROW(load_libsvm("/nonexistent/file.libsvm"), ConfigError);
}

TEST(Labels, NumericLabelsSortNumerically) {
  const Dataset d = parse_libsvm("10 1:1\n2 1:1\n-1 1:1\n2 1:1\n");
  const LabelMap m = map_labels(d);
  EXPECT_EQ(m.classes, (std::vector<std::string>{"-1", "2", "10"}));
  EXPECT_EQ(m.ids, (std::vector<std::size_t>{2, 1, 0, 1}));
}

TEST(Labels, TextLabelsSortLexically) {
  const Dataset d = parse_libsvm("cat 1:1\nant 1:1\n");
  EXPECT_EQ(map_labels(d).ids, (std::vector<std::size_t>{1, 0}));
}

TEST(Scaling, MaxAbsPerFeature) {
  Dataset d = parse_libsvm("1 1:2 2:-4\n0 1:-1\n");
  scale_max_abs(d);
  EXPECT_EQ(d.rows[0].values, (std::vector<double>{1.0, -1.0}));
  EXPECT_EQ(d.rows[1].values, (std::vector<double>{-0.5}));
}

TEST(Partition, ContiguousSizes) {
  const Partition p = partition(10, 3, PartitionStrategy::kContiguous, 0);
  EXPECT_EQ(p.worker_samples[0].size(), 4u);
  EXPECT_EQ(p.worker_samples[1].size(), 3u);
  EXPECT_EQ(p.worker_samples[2].size(), 3u);
}

TEST(Partition, RoundRobin) {
  const Partition p = partition(5, 2, PartitionStrategy::kRoundRobin, 0);
  EXPECT_EQ(p.worker_samples[0], (std::vector<std::size_t>{0, 2, 4}));
  EXPECT_EQ(p.worker_samples[1], (std::vector<std::size_t>{1, 3}));
}

TEST(Partition, SharedGivesEveryoneEverything) {
  const Partition p = partition(7, 3, PartitionStrategy::kShared, 0);
  for (const auto& w : p.worker_samples) EXPECT_EQ(w.size(), 7u);
  EXPECT_TRUE(p.assignment.empty());
}

TEST(Partition, CompleteAndDisjoint) {
  for (auto strategy : {PartitionStrategy::kContiguous, PartitionStrategy::kRoundRobin})
    for (std::size_t n = 1; n <= 13; ++n)
      for (std::size_t m = n; m <= 40; m += 3) {
        const Partition p = partition(m, n, strategy, m * 31 + n);
        std::set<std::size_t> seen;
        std::size_t total = 0;
        for (std::size_t w = 0; w < n; ++w) {
          ASSERT_FALSE(p.worker_samples[w].empty());
          ASSERT_TRUE(std::is_sorted(p.worker_samples[w].begin(), p.worker_samples[w].end()));
          for (std::size_t s : p.worker_samples[w]) {
            ASSERT_EQ(p.assignment[s], w);
            seen.insert(s);
          }
          total += p.worker_samples[w].size();
        }
        ASSERT_EQ(total, m);
        ASSERT_EQ(seen.size(), m);
      }
}

TEST(Partition, SeededShuffleIsDeterministic) {
  const auto a = partition(100, 7, PartitionStrategy::kContiguous, 5);
  const auto b = partition(100, 7, PartitionStrategy::kContiguous, 5);
  const auto c = partition(100, 7, PartitionStrategy::kContiguous, 6);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_NE(a.assignment, c.assignment);
}

TEST(Partition, Errors) {
  EXPECT_THROW(partition(2, 3, PartitionStrategy::kContiguous, 0), ConfigError);
  EXPECT_THROW(partition(5, 0, PartitionStrategy::kRoundRobin, 0), ConfigError);
  EXPECT_THROW(partition_strategy_from_string("random"), ConfigError);
  EXPECT_EQ(partition_strategy_from_string("round_robin"), PartitionStrategy::kRoundRobin);
}

}  // namespace
}  // namespace bicomp
