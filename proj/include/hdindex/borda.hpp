/*
 * Copyright 2026 The hdindex Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef HDINDEX_BORDA_HPP
#define HDINDEX_BORDA_HPP

#include <algorithm>
#include <cstdio>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdindex/core.hpp"

namespace hdindex {

/// descriptor id -> owning image id
using OwnerMap = std::unordered_map<u64, u64>;

/// Text file of "descriptor_id image_id" pairs, one per line ('#' comments).
inline auto read_owner_map(const std::string& path) -> OwnerMap {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw_io("cannot open owner map: " + path);
  OwnerMap owners;
  char line[256];
  u64 lineno = 0;
  while (std::fgets(line, sizeof line, f)) {
    ++lineno;
    const char* p = line;
    while (*p == ' ' || *p == '\t') ++p;
    if (*p == '\0' || *p == '\n' || *p == '#') continue;
    unsigned long long desc, img;
    if (std::sscanf(p, "%llu %llu", &desc, &img) != 2) {
      std::fclose(f);
      throw_data(path + ": malformed owner map line " + std::to_string(lineno));
    }
    owners[desc] = img;
  }
  std::fclose(f);
  return owners;
}

/// Accumulated Borda scores per image across queries.
struct BordaTable {
  std::unordered_map<u64, u64> scores;

  auto total_mass() const -> u64 {
    u64 sum = 0;
    for (const auto& [img, s] : scores) sum += s;
    return sum;
  }
};

/**
 * @brief Adds one descriptor query's ranked answer into the table: the
 * descriptor at rank l (1-based) of a k-long list contributes k + 1 - l
 * points to its owning image. Streaming over queries keeps aggregation at
 * O(images touched) memory regardless of query count.
 */
inline void accumulate_borda(BordaTable& table, const ResultSet& result, const OwnerMap& owners,
                             u64 k) {
  require(k >= 1, errc::config, "accumulate_borda: k must be at least 1");
  require(result.size() <= k, errc::data,
          "accumulate_borda: result list longer than k");
  for (std::size_t l = 0; l < result.size(); ++l) {
    const u64 desc = result.hits[l].id;
    auto it = owners.find(desc);
    require(it != owners.end(), errc::data,
            "accumulate_borda: descriptor " + std::to_string(desc) + " has no owning image");
    table.scores[it->second] += k - l;  // == k + 1 - (l + 1)
  }
}

/// All query descriptors of one image at once. With N descriptor queries each
/// returning a full k list, the table gains exactly N * k * (k + 1) / 2 points.
inline auto borda_scores(const std::vector<ResultSet>& results, const OwnerMap& owners, u64 k)
    -> BordaTable {
  BordaTable table;
  for (const auto& rs : results) accumulate_borda(table, rs, owners, k);
  return table;
}

/// Highest-scoring images, ties broken toward the smaller image id.
inline auto top_images(const BordaTable& table, u64 count) -> std::vector<u64> {
  std::vector<std::pair<u64, u64>> flat(table.scores.begin(), table.scores.end());
  std::sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<u64> out;
  out.reserve(std::min<u64>(count, flat.size()));
  for (const auto& [img, score] : flat) {
    if (out.size() == count) break;
    out.push_back(img);
  }
  return out;
}

}  // namespace hdindex

#endif  // HDINDEX_BORDA_HPP
