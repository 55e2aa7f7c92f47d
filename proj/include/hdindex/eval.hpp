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

#ifndef HDINDEX_EVAL_HPP
#define HDINDEX_EVAL_HPP

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "hdindex/core.hpp"

namespace hdindex {

/**
 * @brief Brute-force exact k-NN over the whole dataset. The quality oracle:
 * every accuracy number is measured against this.
 *
 * Ties on distance break toward the smaller id; k > n returns all n.
 */
inline auto exact_knn(const Dataset& data, std::span<const double> q, u64 k) -> ResultSet {
  require(k >= 1, errc::config, "exact_knn: k must be at least 1");
  const u64 n = data.size();
  std::vector<ResultSet::Hit> all;
  all.reserve(n);
  for (u64 i = 0; i < n; ++i) {
    all.push_back({i, euclidean(q, data[i])});
  }
  const u64 take = std::min(k, n);
  auto cmp = [](const ResultSet::Hit& a, const ResultSet::Hit& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  };
  std::partial_sort(all.begin(), all.begin() + take, all.end(), cmp);
  all.resize(take);
  return ResultSet{std::move(all)};
}

/**
 * @brief Mean distance ratio of an approximate answer against the exact one:
 * (1/k) * sum_i d(q, approx_i) / d(q, exact_i). 1.0 means exact; never below 1
 * up to rounding.
 *
 * Zero exact distances (query coincides with a data point): a term with both
 * distances zero contributes 1; a term with only the denominator zero is
 * dropped and the averaging count shrinks with it.
 */
inline auto approximation_ratio(const ResultSet& approx, const ResultSet& exact) -> double {
  const std::size_t k = std::min(approx.size(), exact.size());
  require(k > 0, errc::config, "approximation_ratio: empty result lists");
  double sum = 0.0;
  std::size_t terms = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double de = exact.hits[i].dist;
    const double da = approx.hits[i].dist;
    if (de == 0.0) {
      if (da == 0.0) {
        sum += 1.0;
        ++terms;
      }
      continue;  // only the denominator vanished: drop the term
    }
    sum += da / de;
    ++terms;
  }
  if (terms == 0) return 1.0;
  return sum / static_cast<double>(terms);
}

/**
 * @brief AP@k of an approximate id list against the exact top-k:
 * (1/k) * sum over positions i of [approx_i is relevant] * (hits so far / i).
 *
 * Order-sensitive: relevant objects returned early score higher. A short
 * approximate list simply contributes nothing for the missing positions.
 */
inline auto average_precision(std::span<const u64> approx_ids, std::span<const u64> exact_ids,
                              u64 k) -> double {
  require(k >= 1, errc::config, "average_precision: k must be at least 1");
  std::unordered_set<u64> relevant;
  for (std::size_t i = 0; i < std::min<std::size_t>(exact_ids.size(), k); ++i) {
    relevant.insert(exact_ids[i]);
  }
  if (relevant.empty()) return 0.0;
  double sum = 0.0;
  u64 found = 0;
  const std::size_t upto = std::min<std::size_t>(approx_ids.size(), k);
  for (std::size_t i = 0; i < upto; ++i) {
    if (relevant.count(approx_ids[i])) {
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(k);
}

/// Arithmetic mean of per-query AP values.
inline auto mean_average_precision(std::span<const double> aps) -> double {
  require(!aps.empty(), errc::config, "mean_average_precision: no queries");
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

/// Per-query and aggregate quality of one run.
struct EvalReport {
  u64 k = 0;
  std::vector<double> ap;     // one AP@k per query
  std::vector<double> ratio;  // one distance ratio per query
  double map = 0.0;
  double mean_ratio = 0.0;
};

inline auto evaluate(const std::vector<ResultSet>& approx, const std::vector<ResultSet>& exact,
                     u64 k) -> EvalReport {
  require(approx.size() == exact.size(), errc::data,
          "evaluate: result and ground-truth files cover different query counts");
  require(!approx.empty(), errc::data, "evaluate: no queries");
  EvalReport rep;
  rep.k = k;
  for (std::size_t qi = 0; qi < approx.size(); ++qi) {
    rep.ap.push_back(average_precision(approx[qi].ids(), exact[qi].ids(), k));
    rep.ratio.push_back(approximation_ratio(approx[qi], exact[qi]));
  }
  rep.map = mean_average_precision(rep.ap);
  rep.mean_ratio = std::accumulate(rep.ratio.begin(), rep.ratio.end(), 0.0) /
                   static_cast<double>(rep.ratio.size());
  return rep;
}

/*----------------------------------------------------------------------------*
 * Result / ground-truth files
 *
 * Both use the same layout and differ only in magic:
 *   magic[4] | version u32 | dataset checksum u64 | k u32 | query count u32 |
 *   then per query, k records of (id u64, distance f64), little-endian.
 * The checksum ties a ground-truth cache to the dataset file it was computed
 * from; reuse against a different dataset is rejected instead of silently
 * producing nonsense metrics.
 *----------------------------------------------------------------------------*/

inline constexpr char kGroundTruthMagic[4] = {'H', 'D', 'G', 'T'};
inline constexpr char kResultMagic[4] = {'H', 'D', 'R', 'S'};
inline constexpr u32 kResultFileVersion = 1;

inline void write_result_file(const std::string& path, const char magic[4], u64 dataset_checksum,
                              u64 k, const std::vector<ResultSet>& results) {
  for (const auto& rs : results) {
    require(rs.size() <= k, errc::internal, "result file: more than k hits for a query");
  }
  byte_writer w;
  w.put_bytes(reinterpret_cast<const u8*>(magic), 4);
  w.put<u32>(kResultFileVersion);
  w.put<u64>(dataset_checksum);
  w.put<u32>(static_cast<u32>(k));
  w.put<u32>(static_cast<u32>(results.size()));
  for (const auto& rs : results) {
    for (u64 i = 0; i < k; ++i) {
      if (i < rs.size()) {
        w.put<u64>(rs.hits[i].id);
        w.put_f64(rs.hits[i].dist);
      } else {
        // fewer than k hits exist (k clamped by collection size): pad slot
        w.put<u64>(~0ull);
        w.put_f64(-1.0);
      }
    }
  }
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw_io("cannot write result file: " + path);
  if (std::fwrite(w.data().data(), 1, w.size(), f) != w.size()) {
    std::fclose(f);
    throw_io("short write on result file: " + path);
  }
  std::fclose(f);
}

struct ResultFile {
  u64 dataset_checksum = 0;
  u64 k = 0;
  std::vector<ResultSet> queries;
};

inline auto read_result_file(const std::string& path, const char magic[4]) -> ResultFile {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw_io("cannot open result file: " + path);
  std::fseek(f, 0, SEEK_END);
  long len = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  std::vector<u8> buf(static_cast<std::size_t>(len));
  if (len > 0 && std::fread(buf.data(), 1, buf.size(), f) != buf.size()) {
    std::fclose(f);
    throw_io("short read on result file: " + path);
  }
  std::fclose(f);

  byte_reader r(buf.data(), buf.size());
  char got[4];
  r.get_bytes(reinterpret_cast<u8*>(got), 4);
  require(std::memcmp(got, magic, 4) == 0, errc::data,
          "result file " + path + " has wrong magic (not the expected file type)");
  u32 version = r.get<u32>();
  require(version == kResultFileVersion, errc::data,
          "result file " + path + ": unsupported version " + std::to_string(version));
  ResultFile out;
  out.dataset_checksum = r.get<u64>();
  out.k = r.get<u32>();
  u32 nq = r.get<u32>();
  out.queries.resize(nq);
  for (u32 qi = 0; qi < nq; ++qi) {
    for (u64 i = 0; i < out.k; ++i) {
      u64 id = r.get<u64>();
      double dist = r.get_f64();
      if (id == ~0ull) continue;  // padding slot
      out.queries[qi].hits.push_back({id, dist});
    }
  }
  return out;
}

}  // namespace hdindex

#endif  // HDINDEX_EVAL_HPP
