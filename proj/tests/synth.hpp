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

// Shared fixtures for the test suite: a hand-checkable 8-point corpus, seeded
// synthetic datasets, and a self-cleaning scratch directory.

#ifndef HDINDEX_TESTS_SYNTH_HPP
#define HDINDEX_TESTS_SYNTH_HPP

#include <cstdlib>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hdindex/core.hpp"
#include "hdindex/ingest.hpp"

namespace hdtest {

using namespace hdindex;

/**
 * Eight 4-d points on [0,1] plus one query, small enough that every
 * intermediate quantity (distances, grid cells, curve keys, candidate sets)
 * can be verified by hand. The narrative tests all build on this corpus.
 */
struct TinyCorpus {
  Dataset data;
  std::vector<double> query;
};

inline auto tiny_corpus() -> TinyCorpus {
  const double rows[8][4] = {
      {0.20, 0.74, 0.68, 0.73},  // id 0
      {0.84, 0.34, 0.49, 0.81},  // id 1
      {0.97, 0.64, 0.32, 0.93},  // id 2
      {0.42, 0.86, 0.12, 0.82},  // id 3
      {0.62, 0.09, 0.56, 0.07},  // id 4
      {0.84, 0.59, 0.49, 0.73},  // id 5
      {0.05, 0.43, 0.52, 0.82},  // id 6
      {0.40, 0.24, 0.10, 0.64},  // id 7
  };
  TinyCorpus tc{Dataset(4, 0.0, 1.0), {0.18, 0.87, 0.76, 0.23}};
  for (u64 i = 0; i < 8; ++i) {
    tc.data.push_back(std::span<const double>(rows[i], 4), i);
  }
  return tc;
}

/// n uniform random points in [lo, hi]^dim, reproducible from the seed.
inline auto make_uniform(u64 n, u64 dim, double lo, double hi, u64 seed) -> Dataset {
  Dataset data(dim, lo, hi);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> row(dim);
  for (u64 i = 0; i < n; ++i) {
    for (auto& v : row) v = dist(rng);
    data.push_back(row, i);
  }
  return data;
}

/**
 * Byte-valued clustered data shaped like low-end image descriptors: `centers`
 * cluster centers drawn uniformly in [0,255]^dim, each point a center plus
 * N(0, sigma) noise, rounded to integers and clamped to the byte range.
 */
inline auto make_clustered_bytes(u64 n, u64 dim, u32 centers, double sigma, u64 seed)
    -> Dataset {
  Dataset data(dim, 0.0, 255.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 255.0);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<std::vector<double>> ctr(centers, std::vector<double>(dim));
  for (auto& c : ctr) {
    for (auto& v : c) v = uni(rng);
  }
  std::uniform_int_distribution<u32> pick(0, centers - 1);
  std::vector<double> row(dim);
  for (u64 i = 0; i < n; ++i) {
    const auto& c = ctr[pick(rng)];
    for (u64 d = 0; d < dim; ++d) {
      double v = std::round(c[d] + noise(rng));
      row[d] = std::min(255.0, std::max(0.0, v));
    }
    data.push_back(row, i);
  }
  return data;
}

/// Runs fn, which must throw hdindex::error, and reports the error category.
template <class F>
inline auto error_kind(F&& fn) -> errc {
  try {
    fn();
  } catch (const error& e) {
    return e.kind();
  }
  throw std::logic_error("expected an hdindex::error, none was thrown");
}

/// Unique scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "hdindex-test-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    require(::mkdtemp(buf.data()) != nullptr, errc::io, "mkdtemp failed for " + tmpl);
    path_ = buf.data();
  }

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }

  TempDir(const TempDir&) = delete;
  auto operator=(const TempDir&) -> TempDir& = delete;

  auto path() const -> const std::string& { return path_; }
  auto file(const std::string& name) const -> std::string { return path_ + "/" + name; }

 private:
  std::string path_;
};

}  // namespace hdtest

#endif  // HDINDEX_TESTS_SYNTH_HPP
