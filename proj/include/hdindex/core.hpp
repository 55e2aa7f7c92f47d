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

#ifndef HDINDEX_CORE_HPP
#define HDINDEX_CORE_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hdindex/common.hpp"

namespace hdindex {

/// One feature vector with its object id.
struct VectorRecord {
  u64 id = 0;
  std::vector<double> coords;
};

/// Euclidean (L2) distance. Accumulates in double regardless of storage type.
inline auto euclidean(std::span<const double> a, std::span<const double> b) -> double {
  require(a.size() == b.size(), errc::data,
          "euclidean: dimensionality mismatch (" + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()) + ")");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

/**
 * @brief In-memory collection of equal-dimensional vectors with dense ids 0..n-1.
 *
 * Coordinates live in one contiguous buffer. `source_rows` maps each id back to
 * the row of the originating file, so on-disk descriptors stay addressable after
 * duplicate removal or query reservation shuffles rows around.
 */
class Dataset {
 public:
  Dataset() = default;

  Dataset(u64 dim, double lo, double hi) : dim_(dim), lo_(lo), hi_(hi) {
    require(dim > 0, errc::config, "Dataset: dimensionality must be positive");
    require(lo < hi, errc::config, "Dataset: empty value domain [lo, hi]");
  }

  void push_back(std::span<const double> coords, u64 source_row) {
    require(coords.size() == dim_, errc::data,
            "Dataset: record has " + std::to_string(coords.size()) + " components, expected " +
                std::to_string(dim_));
    coords_.insert(coords_.end(), coords.begin(), coords.end());
    source_rows_.push_back(source_row);
  }

  auto size() const -> u64 { return source_rows_.size(); }
  auto dim() const -> u64 { return dim_; }
  auto lo() const -> double { return lo_; }
  auto hi() const -> double { return hi_; }

  void set_domain(double lo, double hi) {
    require(lo < hi, errc::config, "Dataset: empty value domain [lo, hi]");
    lo_ = lo;
    hi_ = hi;
  }

  auto operator[](u64 id) const -> std::span<const double> {
    return {coords_.data() + id * dim_, static_cast<std::size_t>(dim_)};
  }

  auto at(u64 id) const -> std::span<const double> {
    require(id < size(), errc::data, "Dataset: id " + std::to_string(id) + " out of range");
    return (*this)[id];
  }

  auto source_row(u64 id) const -> u64 { return source_rows_[id]; }
  auto source_rows() const -> const std::vector<u64>& { return source_rows_; }

  /// Checks that every component is finite and inside [lo, hi].
  void validate() const {
    for (u64 i = 0; i < size(); ++i) {
      for (double v : (*this)[i]) {
        require(std::isfinite(v), errc::data,
                "Dataset: non-finite component in record " + std::to_string(i));
        require(v >= lo_ && v <= hi_, errc::data,
                "Dataset: component " + std::to_string(v) + " of record " + std::to_string(i) +
                    " outside domain [" + std::to_string(lo_) + ", " + std::to_string(hi_) + "]");
      }
    }
  }

  /// Widens [lo, hi] to cover the stored values (used after ingestion scans).
  void fit_domain() {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : coords_) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (coords_.empty() || lo >= hi) return;  // keep configured bounds for degenerate inputs
    lo_ = std::min(lo_, lo);
    hi_ = std::max(hi_, hi);
  }

 private:
  std::vector<double> coords_;
  std::vector<u64> source_rows_;
  u64 dim_ = 0;
  double lo_ = 0.0;
  double hi_ = 1.0;
};

/**
 * @brief Per-query retrieval budget: alpha candidates per tree from the key
 * scan, beta survive the triangular filter, gamma survive the Ptolemaic filter,
 * k results come back. Invariant: 1 <= k <= gamma <= beta <= alpha <= n.
 */
struct QueryParams {
  u64 alpha = 0;
  u64 beta = 0;
  u64 gamma = 0;
  u64 k = 0;

  /// Fills unset (zero) stages from the defaults, rejects contradictory
  /// explicit settings, and clamps every stage to the collection size.
  auto resolved_for(u64 n) const -> QueryParams {
    QueryParams p = *this;
    require(p.k >= 1, errc::config, "QueryParams: k must be at least 1");
    if (p.alpha == 0) p.alpha = default_alpha(n);
    if (p.beta == 0) p.beta = p.alpha;  // triangular stage sees every fetched candidate
    if (p.gamma == 0) p.gamma = std::min<u64>(1024, p.beta);
    require(p.beta <= p.alpha, errc::config, "QueryParams: beta exceeds alpha");
    require(p.gamma <= p.beta, errc::config, "QueryParams: gamma exceeds beta");
    require(p.k <= p.gamma, errc::config, "QueryParams: k exceeds gamma");
    if (n > 0) {
      p.alpha = std::min(p.alpha, n);
      p.beta = std::min(p.beta, n);
      p.gamma = std::min(p.gamma, n);
      p.k = std::min(p.k, n);
    }
    return p;
  }

  static auto default_alpha(u64 n) -> u64 { return n >= 10'000'000 ? 8192 : 4096; }
};

/// Ranked answer list; distances are exact and ascending, ties broken by id.
struct ResultSet {
  struct Hit {
    u64 id;
    double dist;
  };
  std::vector<Hit> hits;

  auto size() const -> std::size_t { return hits.size(); }
  auto ids() const -> std::vector<u64> {
    std::vector<u64> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(h.id);
    return out;
  }
};

}  // namespace hdindex

#endif  // HDINDEX_CORE_HPP
