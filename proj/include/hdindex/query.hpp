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

#ifndef HDINDEX_QUERY_HPP
#define HDINDEX_QUERY_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "hdindex/builder.hpp"

namespace hdindex {

/**
 * @brief Triangle-inequality lower bound on d(q, o) from distances to shared
 * reference objects: max_i |d(q, r_i) - d(o, r_i)|. Never exceeds the true
 * distance, so pruning by it never rejects an object closer than the bound.
 */
inline auto triangular_lb(std::span<const double> qd, std::span<const double> od) -> double {
  require(qd.size() == od.size(), errc::data,
          "triangular_lb: reference distance vectors differ in length");
  double best = 0.0;
  for (std::size_t i = 0; i < qd.size(); ++i) {
    best = std::max(best, std::abs(qd[i] - od[i]));
  }
  return best;
}

/**
 * @brief Ptolemaic lower bound: max over reference pairs (i, j) of
 * |d(q,r_i) d(o,r_j) - d(q,r_j) d(o,r_i)| / d(r_i, r_j). Tighter than the
 * triangular bound on most real workloads, at quadratic cost in the number of
 * references.
 *
 * Pairs of coincident references are skipped; if every pair coincides the
 * bound is undefined and that is reported as an error rather than returned
 * as a fake 0.
 */
inline auto ptolemaic_lb(std::span<const double> qd, std::span<const double> od,
                         const ReferenceSet& refs) -> double {
  const std::size_t m = refs.size();
  require(qd.size() == m && od.size() == m, errc::data,
          "ptolemaic_lb: reference distance vectors do not match the reference set");
  require(m >= 2, errc::config, "ptolemaic_lb: needs at least two references");
  double best = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double dij = refs.dist_pair(i, j);
      if (dij == 0.0) continue;  // coincident references carry no information
      best = std::max(best, std::abs(qd[i] * od[j] - qd[j] * od[i]) / dij);
    }
  }
  require(best >= 0.0, errc::data,
          "ptolemaic_lb: all reference pairs coincide; bound undefined");
  return best;
}

/// Which filter chain queries run.
enum class FilterMode : u8 {
  triangular = 0,  // key scan -> triangular filter -> re-rank
  combined = 1,    // key scan -> triangular -> Ptolemaic -> re-rank
};

inline auto filter_mode_name(FilterMode m) -> std::string {
  return m == FilterMode::triangular ? "triangular" : "combined";
}

inline auto parse_filter_mode(const std::string& s) -> FilterMode {
  if (s == "triangular" || s == "tri") return FilterMode::triangular;
  if (s == "combined" || s == "triangular+ptolemaic") return FilterMode::combined;
  throw_config("unknown filter mode '" + s + "' (expected triangular or combined)");
}

/// Observability for one query: how many candidates each stage kept.
struct QueryStats {
  std::vector<u64> per_tree_fetched;    // after the key scan (<= alpha)
  std::vector<u64> per_tree_survivors;  // after the filter chain (<= gamma)
  u64 kappa = 0;       // deduplicated union size across trees
  u64 reranked = 0;    // candidates fetched and scored exactly (live only)
  u64 gamma_floor = 0; // min over trees of survivors; kappa is within
                       // [gamma_floor, tau * gamma_floor] when nonzero
};

/**
 * @brief Approximate k-NN against a built index.
 *
 * Per tree: fetch the alpha entries nearest to the query's curve position,
 * keep the beta best by triangular bound, then (combined mode) the gamma best
 * by Ptolemaic bound. The per-tree survivors are unioned, tombstoned ids
 * dropped, the surviving descriptors fetched in ascending id order, and the
 * exact distances decide the final k (ties by id).
 */
inline auto knn(HDIndex& idx, std::span<const double> q, const QueryParams& params,
                FilterMode mode = FilterMode::triangular, QueryStats* stats = nullptr)
    -> ResultSet {
  const IndexMeta& meta = idx.meta();
  require(q.size() == meta.nu, errc::data,
          "knn: query has " + std::to_string(q.size()) + " components, index expects " +
              std::to_string(meta.nu));
  for (double v : q) require(std::isfinite(v), errc::data, "knn: non-finite query component");
  if (mode == FilterMode::combined) {
    require(meta.m_eff >= 2, errc::config,
            "knn: combined filtering needs at least two references, index has " +
                std::to_string(meta.m_eff));
  }
  if (idx.object_count() == 0 || idx.live_count() == 0) return {};
  const QueryParams p = params.resolved_for(idx.object_count());

  const std::vector<double> qd = idx.references().dists_to(q);
  if (stats) {
    stats->per_tree_fetched.clear();
    stats->per_tree_survivors.clear();
  }

  std::vector<u64> pool;  // union of per-tree survivor ids
  std::vector<double> od(meta.m_eff);
  u64 gamma_floor = ~0ull;
  for (u32 t = 0; t < meta.tau; ++t) {
    const HilbertKey probe = idx.tree_key(q, t);
    std::vector<LeafEntry> cands = idx.trees()[t].nearest(probe, p.alpha);
    if (stats) stats->per_tree_fetched.push_back(cands.size());

    // Triangular stage: order candidate slots by (bound, id), keep beta.
    std::vector<std::pair<double, u32>> ranked(cands.size());
    for (u32 c = 0; c < cands.size(); ++c) {
      for (u32 r = 0; r < meta.m_eff; ++r) od[r] = cands[c].refdists[r];
      ranked[c] = {triangular_lb(qd, od), c};
    }
    auto by_bound = [&](const std::pair<double, u32>& a, const std::pair<double, u32>& b) {
      if (a.first != b.first) return a.first < b.first;
      return cands[a.second].id < cands[b.second].id;
    };
    const u64 keep_tri = std::min<u64>(mode == FilterMode::combined ? p.beta : p.gamma,
                                       ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + keep_tri, ranked.end(), by_bound);
    ranked.resize(keep_tri);

    if (mode == FilterMode::combined) {
      for (auto& [bound, c] : ranked) {
        for (u32 r = 0; r < meta.m_eff; ++r) od[r] = cands[c].refdists[r];
        bound = ptolemaic_lb(qd, od, idx.references());
      }
      const u64 keep_pt = std::min<u64>(p.gamma, ranked.size());
      std::partial_sort(ranked.begin(), ranked.begin() + keep_pt, ranked.end(), by_bound);
      ranked.resize(keep_pt);
    }

    if (stats) stats->per_tree_survivors.push_back(ranked.size());
    gamma_floor = std::min<u64>(gamma_floor, ranked.size());
    for (const auto& [bound, c] : ranked) pool.push_back(cands[c].id);
  }

  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (stats) {
    stats->kappa = pool.size();
    stats->gamma_floor = gamma_floor == ~0ull ? 0 : gamma_floor;
  }

  // Exact re-ranking over live candidates, ids ascending for fetch locality.
  std::vector<ResultSet::Hit> hits;
  hits.reserve(pool.size());
  for (u64 id : pool) {
    if (!idx.is_live(id)) continue;
    const std::vector<double> coords = idx.fetch_coords(id);
    hits.push_back({id, euclidean(q, coords)});
  }
  if (stats) stats->reranked = hits.size();

  const u64 take = std::min<u64>(p.k, hits.size());
  auto cmp = [](const ResultSet::Hit& a, const ResultSet::Hit& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  };
  std::partial_sort(hits.begin(), hits.begin() + take, hits.end(), cmp);
  hits.resize(take);
  return ResultSet{std::move(hits)};
}

}  // namespace hdindex

#endif  // HDINDEX_QUERY_HPP
