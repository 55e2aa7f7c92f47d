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

#ifndef HDINDEX_REFSEL_HPP
#define HDINDEX_REFSEL_HPP

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "hdindex/core.hpp"

namespace hdindex {

enum class SelectionMethod : u8 {
  random = 0,
  sss = 1,      // sparse spatial selection: greedy cover at radius f * dmax
  sss_dyn = 2,  // sss seed set, then contribution-driven replacement
  fixed = 3,    // caller supplied the ids; no selection ran
};

inline auto selection_method_name(SelectionMethod m) -> std::string {
  switch (m) {
    case SelectionMethod::random: return "random";
    case SelectionMethod::sss: return "sss";
    case SelectionMethod::sss_dyn: return "sss-dyn";
    case SelectionMethod::fixed: return "fixed";
  }
  throw_internal("selection_method_name: bad method");
}

inline auto parse_selection_method(const std::string& s) -> SelectionMethod {
  if (s == "random") return SelectionMethod::random;
  if (s == "sss") return SelectionMethod::sss;
  if (s == "sss-dyn" || s == "sss_dyn") return SelectionMethod::sss_dyn;
  throw_config("unknown selection method '" + s + "' (expected random, sss, or sss-dyn)");
}

/**
 * @brief The reference objects a built index filters against. Coordinates are
 * copied out of the dataset so the set stays self-contained, and the pairwise
 * distance matrix is precomputed because the Ptolemaic bound divides by it on
 * every candidate.
 */
struct ReferenceSet {
  std::vector<u64> ids;
  std::vector<std::vector<double>> coords;
  std::vector<double> pairwise;  // row-major size() x size()
  double dmax = 0.0;             // diameter estimate the selection used
  double f_used = 0.0;           // possibly relaxed below the requested f
  SelectionMethod method = SelectionMethod::sss;

  auto size() const -> std::size_t { return ids.size(); }

  auto dist_pair(std::size_t i, std::size_t j) const -> double {
    return pairwise[i * size() + j];
  }

  /// Distances from an arbitrary vector to every reference, in member order.
  auto dists_to(std::span<const double> q) const -> std::vector<double> {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = euclidean(q, coords[i]);
    return out;
  }

  void finalize_pairwise() {
    const std::size_t m = size();
    pairwise.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        double d = euclidean(coords[i], coords[j]);
        pairwise[i * m + j] = d;
        pairwise[j * m + i] = d;
      }
    }
  }
};

/**
 * @brief Estimates the dataset diameter by farthest-neighbor hopping: start at
 * a seeded random record, repeatedly jump to the point farthest from the
 * current one, and stop when the distance no longer grows (or after
 * `max_hops`). Each hop is a full scan, so cost is at most max_hops * n.
 */
inline auto estimate_dmax(const Dataset& data, u64 seed, u32 max_hops = 20) -> double {
  require(data.size() >= 2, errc::config, "estimate_dmax: need at least two records");
  std::mt19937_64 rng(seed);
  u64 cur = std::uniform_int_distribution<u64>(0, data.size() - 1)(rng);
  double best = 0.0;
  for (u32 hop = 0; hop < max_hops; ++hop) {
    u64 far = cur;
    double far_d = -1.0;
    for (u64 i = 0; i < data.size(); ++i) {
      double d = euclidean(data[cur], data[i]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far_d <= best) break;
    best = far_d;
    cur = far;
  }
  return best;
}

namespace detail {

inline auto make_reference_set(const Dataset& data, std::vector<u64> ids, double dmax,
                               double f_used, SelectionMethod method) -> ReferenceSet {
  ReferenceSet rs;
  rs.ids = std::move(ids);
  rs.coords.reserve(rs.ids.size());
  for (u64 id : rs.ids) {
    auto row = data[id];
    rs.coords.emplace_back(row.begin(), row.end());
  }
  rs.dmax = dmax;
  rs.f_used = f_used;
  rs.method = method;
  rs.finalize_pairwise();
  return rs;
}

}  // namespace detail

/// References chosen by the caller, bypassing any selection heuristic.
inline auto select_fixed(const Dataset& data, std::vector<u64> ids) -> ReferenceSet {
  require(!ids.empty(), errc::config, "select_fixed: no reference ids given");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] < data.size(), errc::config,
            "select_fixed: id " + std::to_string(ids[i]) + " out of range");
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      require(ids[i] != ids[j], errc::config,
              "select_fixed: duplicate reference id " + std::to_string(ids[i]));
    }
  }
  return detail::make_reference_set(data, std::move(ids), 0.0, 0.0, SelectionMethod::fixed);
}

/// Uniform sample of m distinct records.
inline auto select_random(const Dataset& data, u32 m, u64 seed) -> ReferenceSet {
  require(m >= 1 && m <= data.size(), errc::config,
          "select_random: m must lie in [1, n]");
  std::vector<u64> all(data.size());
  for (u64 i = 0; i < data.size(); ++i) all[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<u64> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), m, rng);
  return detail::make_reference_set(data, std::move(picked), 0.0, 0.0,
                                    SelectionMethod::random);
}

namespace detail {

// One greedy sparse-selection pass: scan ids in order and keep every record
// farther than f * dmax from everything kept so far. Returns the selected ids
// (seed member included) and may stop early once m are found.
inline auto sss_scan(const Dataset& data, u32 m, double threshold,
                     const std::vector<u64>& preselected) -> std::vector<u64> {
  std::vector<u64> sel = preselected;
  std::vector<u8> in_sel(data.size(), 0);
  for (u64 id : sel) in_sel[id] = 1;
  for (u64 i = 0; i < data.size() && sel.size() < m; ++i) {
    if (in_sel[i]) continue;
    bool ok = true;
    for (u64 s : sel) {
      if (euclidean(data[i], data[s]) <= threshold) {
        ok = false;
        break;
      }
    }
    if (ok) {
      sel.push_back(i);
      in_sel[i] = 1;
    }
  }
  return sel;
}

}  // namespace detail

/**
 * @brief Sparse spatial selection. The first reference is a seeded random
 * record; after that, a record joins whenever it lies farther than f * dmax
 * from every already-selected reference. If a pass cannot fill all m slots the
 * radius factor is relaxed by 10% and the scan repeats, bottoming out at
 * "any record distinct from the selected ones".
 */
inline auto select_sss(const Dataset& data, u32 m, double f, double dmax, u64 seed)
    -> ReferenceSet {
  require(m >= 2, errc::config, "select_sss: need at least two references");
  require(m <= data.size(), errc::config,
          "select_sss: m=" + std::to_string(m) + " exceeds collection size " +
              std::to_string(data.size()));
  require(f > 0.0 && dmax > 0.0, errc::config, "select_sss: f and dmax must be positive");

  std::mt19937_64 rng(seed);
  std::vector<u64> first{std::uniform_int_distribution<u64>(0, data.size() - 1)(rng)};

  double fr = f;
  for (;;) {
    auto sel = detail::sss_scan(data, m, fr * dmax, first);
    if (sel.size() == m) {
      return detail::make_reference_set(data, std::move(sel), dmax, fr, SelectionMethod::sss);
    }
    if (fr * dmax <= 0.0 || fr < 1e-12) {
      // Even "strictly farther than zero" failed: the data is duplicate-laden.
      auto last = detail::sss_scan(data, m, 0.0, first);
      require(last.size() == m, errc::data,
              "select_sss: fewer than m distinct records available");
      return detail::make_reference_set(data, std::move(last), dmax, 0.0, SelectionMethod::sss);
    }
    fr *= 0.9;
  }
}

/**
 * @brief Sparse selection with contribution-driven replacement. After the
 * greedy pass fills m slots, scanning continues; each further record that
 * satisfies the sparsity condition is offered as a replacement for the member
 * contributing least, and the swap happens only if the total contribution
 * grows.
 *
 * Contribution of a set S is measured over `pair_budget` seeded sample pairs
 * (a, b) as the sum of max_{r in S} |d(a, r) - d(b, r)| — how well S separates
 * random pairs, i.e. how tight triangular bounds built from S will be.
 */
inline auto select_sss_dyn(const Dataset& data, u32 m, double f, double dmax, u64 seed,
                           u32 pair_budget = 1000) -> ReferenceSet {
  require(m >= 2, errc::config, "select_sss_dyn: need at least two references");
  require(m <= data.size(), errc::config,
          "select_sss_dyn: m=" + std::to_string(m) + " exceeds collection size " +
              std::to_string(data.size()));
  require(pair_budget >= 1, errc::config, "select_sss_dyn: pair budget must be positive");

  ReferenceSet base = select_sss(data, m, f, dmax, seed);
  std::vector<u64> sel = base.ids;
  const double threshold = base.f_used * dmax;

  // Seeded evaluation pairs (distinct endpoints).
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_int_distribution<u64> pick(0, data.size() - 1);
  std::vector<u64> pa(pair_budget), pb(pair_budget);
  for (u32 p = 0; p < pair_budget; ++p) {
    pa[p] = pick(rng);
    do {
      pb[p] = pick(rng);
    } while (pb[p] == pa[p] && data.size() > 1);
  }

  // bounds[p * m + r] = |d(a_p, sel_r) - d(b_p, sel_r)|
  std::vector<double> bounds(static_cast<std::size_t>(pair_budget) * m);
  auto fill_column = [&](u32 r) {
    for (u32 p = 0; p < pair_budget; ++p) {
      bounds[static_cast<std::size_t>(p) * m + r] =
          std::abs(euclidean(data[pa[p]], data[sel[r]]) - euclidean(data[pb[p]], data[sel[r]]));
    }
  };
  for (u32 r = 0; r < m; ++r) fill_column(r);

  // Per-pair best and runner-up member, so "total without member r" is O(1).
  std::vector<double> max1(pair_budget), max2(pair_budget);
  std::vector<u32> arg1(pair_budget);
  double total = 0.0;
  auto refresh_rows = [&] {
    total = 0.0;
    for (u32 p = 0; p < pair_budget; ++p) {
      double m1 = -1.0, m2 = -1.0;
      u32 a1 = 0;
      for (u32 r = 0; r < m; ++r) {
        double v = bounds[static_cast<std::size_t>(p) * m + r];
        if (v > m1) {
          m2 = m1;
          m1 = v;
          a1 = r;
        } else if (v > m2) {
          m2 = v;
        }
      }
      max1[p] = m1;
      max2[p] = m2;
      arg1[p] = a1;
      total += m1;
    }
  };
  refresh_rows();

  std::vector<u8> in_sel(data.size(), 0);
  for (u64 id : sel) in_sel[id] = 1;
  std::vector<double> cand_col(pair_budget);

  for (u64 x = 0; x < data.size(); ++x) {
    if (in_sel[x]) continue;
    bool sparse = true;
    for (u64 s : sel) {
      if (euclidean(data[x], data[s]) <= threshold) {
        sparse = false;
        break;
      }
    }
    if (!sparse) continue;

    // Victim: the member whose removal hurts the total least.
    double best_without = -1.0;
    u32 victim = 0;
    for (u32 r = 0; r < m; ++r) {
      double without = 0.0;
      for (u32 p = 0; p < pair_budget; ++p) {
        without += (arg1[p] == r) ? max2[p] : max1[p];
      }
      if (without > best_without) {
        best_without = without;
        victim = r;
      }
    }

    for (u32 p = 0; p < pair_budget; ++p) {
      cand_col[p] =
          std::abs(euclidean(data[pa[p]], data[x]) - euclidean(data[pb[p]], data[x]));
    }
    double with_cand = 0.0;
    for (u32 p = 0; p < pair_budget; ++p) {
      double excl = (arg1[p] == victim) ? max2[p] : max1[p];
      with_cand += std::max(excl, cand_col[p]);
    }

    if (with_cand > total) {
      in_sel[sel[victim]] = 0;
      in_sel[x] = 1;
      sel[victim] = x;
      for (u32 p = 0; p < pair_budget; ++p) {
        bounds[static_cast<std::size_t>(p) * m + victim] = cand_col[p];
      }
      refresh_rows();
    }
  }

  auto rs = detail::make_reference_set(data, std::move(sel), dmax, base.f_used,
                                       SelectionMethod::sss_dyn);
  return rs;
}

/// Dispatcher used by the index builder: estimates dmax when the method needs
/// it and falls back to plain random sampling for degenerate m.
inline auto select_references(const Dataset& data, SelectionMethod method, u32 m, double f,
                              u64 seed, u32 pair_budget = 1000) -> ReferenceSet {
  require(m >= 1 && m <= data.size(), errc::config,
          "select_references: m must lie in [1, n]");
  if (method == SelectionMethod::random || m < 2) {
    // sparse selection needs two members to mean anything; fall back to random
    return select_random(data, m, seed);
  }
  const double dmax = estimate_dmax(data, seed);
  require(dmax > 0.0, errc::data, "select_references: all records identical");
  if (method == SelectionMethod::sss) return select_sss(data, m, f, dmax, seed);
  return select_sss_dyn(data, m, f, dmax, seed, pair_budget);
}

}  // namespace hdindex

#endif  // HDINDEX_REFSEL_HPP
