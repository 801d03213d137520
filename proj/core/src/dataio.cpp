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

#include "bicomp/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "bicomp/errors.hpp"
#include "bicomp/rng.hpp"

namespace bicomp {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || first == ptr)
    throw ParseError(line, "unparsable number '" + std::string(tok) + "'");
  return v;
}

}  // namespace

Dataset parse_libsvm(std::string_view text) {
  Dataset data;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(line[i])) ++i;
      std::size_t j = i;
      while (j < line.size() && !is_space(line[j])) ++j;
      if (j > i) tokens.push_back(line.substr(i, j - i));
      i = j;
    }
    if (tokens.empty()) continue;

    SparseRow row;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const std::string_view tok = tokens[t];
      const std::size_t colon = tok.find(':');
      if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError(line_no, "malformed pair '" + std::string(tok) + "'");
      std::size_t index = 0;
      const std::string_view idx_tok = tok.substr(0, colon);
      auto [ptr, ec] = std::from_chars(idx_tok.data(), idx_tok.data() + idx_tok.size(), index);
      if (ec != std::errc() || ptr != idx_tok.data() + idx_tok.size() || index == 0)
        throw ParseError(line_no, "bad feature index '" + std::string(idx_tok) + "'");
      const std::size_t zero_based = index - 1;
      if (!row.indices.empty() && zero_based <= row.indices.back())
        throw ParseError(line_no, "feature indices must be strictly increasing");
      row.indices.push_back(zero_based);
      row.values.push_back(parse_number(tok.substr(colon + 1), line_no));
    }
    if (!row.indices.empty())
      data.d_features = std::max(data.d_features, row.indices.back() + 1);
    data.labels.emplace_back(tokens.front());
    data.rows.push_back(std::move(row));
  }
  return data;
}

Dataset load_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open dataset '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_libsvm(ss.str());
}

std::string write_libsvm(const Dataset& data) {
  std::string out;
  for (std::size_t s = 0; s < data.rows.size(); ++s) {
    out += data.labels[s];
    const SparseRow& row = data.rows[s];
    for (std::size_t t = 0; t < row.indices.size(); ++t) {
      out += ' ';
      out += std::to_string(row.indices[t] + 1);
      out += ':';
      out += shortest(row.values[t]);
    }
    out += '\n';
  }
  return out;
}

LabelMap map_labels(const Dataset& data) {
  LabelMap map;
  std::vector<std::string> distinct = data.labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  bool numeric = true;
  std::vector<std::pair<double, std::string>> keyed;
  for (const auto& l : distinct) {
    try {
      keyed.emplace_back(parse_number(l, 0), l);
    } catch (const ParseError&) {
      numeric = false;
      break;
    }
  }
  if (numeric) {
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    distinct.clear();
    for (auto& [v, l] : keyed) distinct.push_back(l);
  }
  std::map<std::string, std::size_t> id;
  for (std::size_t c = 0; c < distinct.size(); ++c) id[distinct[c]] = c;
  map.classes = std::move(distinct);
  map.ids.reserve(data.labels.size());
  for (const auto& l : data.labels) map.ids.push_back(id.at(l));
  return map;
}

void scale_max_abs(Dataset& data) {
  std::vector<double> max_abs(data.d_features, 0.0);
  for (const auto& row : data.rows)
    for (std::size_t t = 0; t < row.indices.size(); ++t)
      max_abs[row.indices[t]] = std::max(max_abs[row.indices[t]], std::abs(row.values[t]));
  for (auto& row : data.rows)
    for (std::size_t t = 0; t < row.indices.size(); ++t)
      if (max_abs[row.indices[t]] > 0.0) row.values[t] /= max_abs[row.indices[t]];
}

PartitionStrategy partition_strategy_from_string(std::string_view s) {
  if (s == "contiguous") return PartitionStrategy::kContiguous;
  if (s == "round_robin") return PartitionStrategy::kRoundRobin;
  if (s == "shared") return PartitionStrategy::kShared;
  throw ConfigError("partition: unknown strategy \"" + std::string(s) + "\"");
}

std::string_view to_string(PartitionStrategy s) {
  switch (s) {
    case PartitionStrategy::kContiguous: return "contiguous";
    case PartitionStrategy::kRoundRobin: return "round_robin";
    case PartitionStrategy::kShared: return "shared";
  }
  return "?";
}

Partition partition(std::size_t n_samples, std::size_t n_workers,
                    PartitionStrategy strategy, std::uint64_t seed) {
  if (n_workers == 0) throw ConfigError("partition: n_workers must be at least 1");
  Partition part;
  part.strategy = strategy;
  part.n_workers = n_workers;
  part.n_samples = n_samples;
  part.worker_samples.resize(n_workers);

  if (strategy == PartitionStrategy::kShared) {
    std::vector<std::size_t> all(n_samples);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (auto& w : part.worker_samples) w = all;
    return part;
  }
  if (n_workers > n_samples)
    throw ConfigError("partition: n_workers=" + std::to_string(n_workers) +
                      " exceeds n_samples=" + std::to_string(n_samples));
  part.assignment.resize(n_samples);
  if (strategy == PartitionStrategy::kRoundRobin) {
    for (std::size_t s = 0; s < n_samples; ++s) part.assignment[s] = s % n_workers;
  } else {
    std::vector<std::size_t> order(n_samples);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(StreamKey{seed, StreamRole::kData, 0, 0});
    for (std::size_t i = n_samples; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_index(i))]);
    const std::size_t base = n_samples / n_workers;
    const std::size_t extra = n_samples % n_workers;
    std::size_t cursor = 0;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t size = base + (w < extra ? 1 : 0);
      for (std::size_t t = 0; t < size; ++t) part.assignment[order[cursor++]] = w;
    }
  }
  for (std::size_t s = 0; s < n_samples; ++s)
    part.worker_samples[part.assignment[s]].push_back(s);
  return part;
}

}  // namespace bicomp
