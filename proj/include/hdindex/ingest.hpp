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

#ifndef HDINDEX_INGEST_HPP
#define HDINDEX_INGEST_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "hdindex/core.hpp"

namespace hdindex {

/// On-disk component type of a vector file. Every record is a 4-byte
/// little-endian component count followed by that many components.
enum class ElementKind : u8 {
  f32 = 0,  // .fvecs
  u8x = 1,  // .bvecs
  i32 = 2,  // .ivecs
};

inline auto element_size(ElementKind k) -> std::size_t {
  switch (k) {
    case ElementKind::f32: return 4;
    case ElementKind::u8x: return 1;
    case ElementKind::i32: return 4;
  }
  throw_internal("element_size: bad kind");
}

inline auto element_kind_name(ElementKind k) -> std::string {
  switch (k) {
    case ElementKind::f32: return "fvecs";
    case ElementKind::u8x: return "bvecs";
    case ElementKind::i32: return "ivecs";
  }
  throw_internal("element_kind_name: bad kind");
}

inline auto parse_element_kind(const std::string& s) -> ElementKind {
  if (s == "fvecs" || s == "f32") return ElementKind::f32;
  if (s == "bvecs" || s == "u8") return ElementKind::u8x;
  if (s == "ivecs" || s == "i32") return ElementKind::i32;
  throw_config("unknown vector file kind '" + s + "' (expected fvecs, bvecs, or ivecs)");
}

namespace detail {

class file_handle {
 public:
  file_handle(const std::string& path, const char* mode) : f_(std::fopen(path.c_str(), mode)) {
    if (!f_) throw_io("cannot open " + path);
  }
  ~file_handle() {
    if (f_) std::fclose(f_);
  }
  file_handle(const file_handle&) = delete;
  auto operator=(const file_handle&) -> file_handle& = delete;

  auto get() -> std::FILE* { return f_; }

 private:
  std::FILE* f_;
};

}  // namespace detail

/**
 * @brief Reads a whole vector file into memory, up-converting components to
 * double. All records must share one component count; the offender's index is
 * named otherwise.
 *
 * The value domain defaults to [0, 255] for byte files and to the observed
 * min/max for the rest; pass an explicit [lo, hi] to override (required when a
 * file legitimately does not span its nominal domain).
 */
inline auto read_vecs(const std::string& path, ElementKind kind, double lo = 0.0, double hi = 0.0)
    -> Dataset {
  detail::file_handle fh(path, "rb");
  std::FILE* f = fh.get();

  const std::size_t esz = element_size(kind);
  std::vector<u8> raw;
  std::vector<double> comps;
  u64 dim = 0;
  u64 row = 0;
  Dataset out;
  for (;; ++row) {
    u8 dim_buf[4];
    std::size_t got = std::fread(dim_buf, 1, 4, f);
    if (got == 0) break;  // clean EOF
    require(got == 4, errc::data, path + ": truncated component count in record " +
                                      std::to_string(row));
    i32 d = load_le<i32>(dim_buf);
    require(d > 0, errc::data,
            path + ": record " + std::to_string(row) + " has non-positive component count " +
                std::to_string(d));
    if (row == 0) {
      dim = static_cast<u64>(d);
      out = Dataset(dim, 0.0, 1.0);  // domain fixed after the scan
    } else {
      require(static_cast<u64>(d) == dim, errc::data,
              path + ": record " + std::to_string(row) + " has " + std::to_string(d) +
                  " components, expected " + std::to_string(dim));
    }
    raw.resize(dim * esz);
    require(std::fread(raw.data(), 1, raw.size(), f) == raw.size(), errc::data,
            path + ": truncated components in record " + std::to_string(row));
    comps.resize(dim);
    for (u64 i = 0; i < dim; ++i) {
      switch (kind) {
        case ElementKind::f32: comps[i] = load_f32_le(raw.data() + i * 4); break;
        case ElementKind::u8x: comps[i] = raw[i]; break;
        case ElementKind::i32: comps[i] = load_le<i32>(raw.data() + i * 4); break;
      }
    }
    out.push_back(comps, row);
  }
  if (out.size() == 0) return Dataset{};  // empty file reads as an empty dataset

  if (lo < hi) {
    out.set_domain(lo, hi);
    out.validate();
  } else if (kind == ElementKind::u8x) {
    out.set_domain(0.0, 255.0);
  } else {
    double vlo = out[0][0], vhi = out[0][0];
    for (u64 i = 0; i < out.size(); ++i) {
      for (double v : out[i]) {
        require(std::isfinite(v), errc::data,
                path + ": non-finite component in record " + std::to_string(i));
        vlo = std::min(vlo, v);
        vhi = std::max(vhi, v);
      }
    }
    if (vlo >= vhi) {  // constant file: widen so quantization has a real interval
      vlo -= 0.5;
      vhi += 0.5;
    }
    out.set_domain(vlo, vhi);
  }
  return out;
}

/// Writes records back out in the given element format. Byte and integer kinds
/// require integral in-range components.
inline void write_vecs(const std::string& path, const Dataset& data, ElementKind kind) {
  detail::file_handle fh(path, "wb");
  std::FILE* f = fh.get();
  const u64 dim = data.dim();
  std::vector<u8> rec(4 + dim * element_size(kind));
  for (u64 i = 0; i < data.size(); ++i) {
    store_le<i32>(rec.data(), static_cast<i32>(dim));
    auto row = data[i];
    for (u64 j = 0; j < dim; ++j) {
      double v = row[j];
      u8* at = rec.data() + 4 + j * element_size(kind);
      switch (kind) {
        case ElementKind::f32:
          store_f32_le(at, static_cast<float>(v));
          break;
        case ElementKind::u8x:
          require(v == std::floor(v) && v >= 0.0 && v <= 255.0, errc::data,
                  "write_vecs: component " + std::to_string(v) + " of record " +
                      std::to_string(i) + " does not fit a byte");
          *at = static_cast<u8>(v);
          break;
        case ElementKind::i32:
          require(v == std::floor(v) && v >= -2147483648.0 && v <= 2147483647.0, errc::data,
                  "write_vecs: component " + std::to_string(v) + " of record " +
                      std::to_string(i) + " does not fit a 32-bit integer");
          store_le<i32>(at, static_cast<i32>(v));
          break;
      }
    }
    require(std::fwrite(rec.data(), 1, rec.size(), f) == rec.size(), errc::io,
            "short write on " + path);
  }
}

/**
 * @brief Drops exact duplicate records, keeping the first occurrence. Ids are
 * re-densified; source rows keep pointing at the original file rows, so disk
 * descriptors remain reachable.
 */
inline auto deduplicate(const Dataset& data) -> Dataset {
  Dataset out(data.dim(), data.lo(), data.hi());
  std::unordered_map<u64, std::vector<u64>> buckets;  // coarse hash -> kept ids
  for (u64 i = 0; i < data.size(); ++i) {
    auto row = data[i];
    const u64 h = fnv1a64(row.data(), row.size() * sizeof(double));
    auto& bucket = buckets[h];
    bool dup = false;
    for (u64 kept : bucket) {
      auto other = out[kept];
      if (std::memcmp(row.data(), other.data(), row.size() * sizeof(double)) == 0) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    bucket.push_back(out.size());
    out.push_back(row, data.source_row(i));
  }
  return out;
}

/**
 * @brief Multiplies every component by `factor` and rounds to the nearest
 * integer, for datasets delivered as small reals (index files store integer
 * grids more compactly). Overflow past 32-bit integer range names the record.
 */
inline auto scale_to_integer(const Dataset& data, double factor) -> Dataset {
  require(factor > 0.0, errc::config, "scale_to_integer: factor must be positive");
  const double lo = std::round(data.lo() * factor);
  const double hi = std::round(data.hi() * factor);
  require(lo < hi, errc::config,
          "scale_to_integer: factor " + std::to_string(factor) + " collapses the domain");
  Dataset out(data.dim(), lo, hi);
  std::vector<double> comps(data.dim());
  for (u64 i = 0; i < data.size(); ++i) {
    auto row = data[i];
    for (u64 j = 0; j < data.dim(); ++j) {
      double v = std::round(row[j] * factor);
      require(v >= -2147483648.0 && v <= 2147483647.0, errc::data,
              "scale_to_integer: record " + std::to_string(i) +
                  " overflows 32-bit integer range after scaling");
      comps[j] = v;
    }
    out.push_back(comps, data.source_row(i));
  }
  return out;
}

struct QuerySplit {
  Dataset base;     // records that stay indexable
  Dataset queries;  // records withheld as the query workload
};

/// Withholds `count` uniformly sampled records (deterministic per seed) as
/// queries and returns the remainder as the indexable set.
inline auto reserve_queries(const Dataset& data, u64 count, u64 seed) -> QuerySplit {
  require(count >= 1, errc::config, "reserve_queries: count must be at least 1");
  require(count < data.size(), errc::config,
          "reserve_queries: cannot withhold " + std::to_string(count) + " of " +
              std::to_string(data.size()) + " records");
  std::vector<u64> rows(data.size());
  for (u64 i = 0; i < data.size(); ++i) rows[i] = i;
  std::mt19937_64 rng(seed);
  std::vector<u64> picked;
  std::sample(rows.begin(), rows.end(), std::back_inserter(picked), count, rng);
  std::vector<u8> is_query(data.size(), 0);
  for (u64 r : picked) is_query[r] = 1;

  QuerySplit split{Dataset(data.dim(), data.lo(), data.hi()),
                   Dataset(data.dim(), data.lo(), data.hi())};
  for (u64 i = 0; i < data.size(); ++i) {
    (is_query[i] ? split.queries : split.base).push_back(data[i], data.source_row(i));
  }
  return split;
}

}  // namespace hdindex

#endif  // HDINDEX_INGEST_HPP
