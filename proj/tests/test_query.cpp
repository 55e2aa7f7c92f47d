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

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdindex/eval.hpp"
#include "hdindex/ingest.hpp"
#include "hdindex/query.hpp"
#include "synth.hpp"

using namespace hdindex;
using hdtest::error_kind;
using hdtest::TempDir;
using Catch::Matchers::WithinAbs;

namespace {

auto stage(const TempDir& dir, Dataset& data, ElementKind kind,
           const std::string& name) -> std::string {
  auto p = dir.file(name);
  write_vecs(p, data, kind);
  data = read_vecs(p, kind, data.lo(), data.hi());
  return p;
}

auto wide_open(u64 n, u64 k) -> QueryParams {
  QueryParams p;
  p.k = k;
  p.alpha = n;
  p.beta = n;
  p.gamma = n;
  return p;
}

}  // namespace

TEST_CASE("the worked example finds its true nearest neighbors") {
  TempDir dir;
  auto tc = hdtest::tiny_corpus();
  auto path = stage(dir, tc.data, ElementKind::f32, "tiny.fvecs");

  IndexConfig cfg;
  cfg.tau = 2;
  cfg.omega = 8;
  cfg.fixed_refs = {2, 6};
  auto idx = HDIndex::build(tc.data, ElementKind::f32, cfg, path);

  auto got = knn(idx, tc.query, wide_open(8, 2));
  REQUIRE(got.hits.size() == 2);
  CHECK(got.hits[0].id == 0);
  CHECK(got.hits[1].id == 6);
  CHECK_THAT(got.hits[0].dist, WithinAbs(0.523163, 1e-4));
  CHECK_THAT(got.hits[1].dist, WithinAbs(0.784984, 1e-4));

  // With every knob at n the search degenerates to the exact scan.
  auto truth = exact_knn(tc.data, tc.query, 2);
  REQUIRE(truth.hits.size() == 2);
  CHECK(got.hits[0].id == truth.hits[0].id);
  CHECK(got.hits[0].dist == truth.hits[0].dist);
  CHECK(got.hits[1].dist == truth.hits[1].dist);

  // A narrow funnel still finds the single nearest neighbor here.
  QueryParams narrow;
  narrow.k = 1;
  narrow.alpha = 4;
  narrow.beta = 4;
  narrow.gamma = 2;
  auto near1 = knn(idx, tc.query, narrow);
  REQUIRE(near1.hits.size() == 1);
  CHECK(near1.hits[0].id == 0);
}

TEST_CASE("wide-open search reproduces the exact scan in id order") {
  TempDir dir;
  auto data = hdtest::make_uniform(300, 32, 0.0, 1.0, 101);
  auto path = stage(dir, data, ElementKind::f32, "eq.fvecs");
  IndexConfig cfg;
  cfg.m = 5;
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);

  auto queries = hdtest::make_uniform(20, 32, 0.0, 1.0, 505);
  for (u64 k : {1ull, 10ull, 100ull}) {
    for (u64 qi = 0; qi < queries.size(); ++qi) {
      auto approx = knn(idx, queries[qi], wide_open(300, k));
      auto exact = exact_knn(data, queries[qi], k);
      REQUIRE(approx.hits.size() == exact.hits.size());
      for (std::size_t i = 0; i < exact.hits.size(); ++i) {
        REQUIRE(approx.hits[i].id == exact.hits[i].id);
        REQUIRE(approx.hits[i].dist == exact.hits[i].dist);
      }
    }
  }
}

TEST_CASE("combined filtering agrees with triangular when nothing is cut") {
  TempDir dir;
  auto data = hdtest::make_uniform(200, 16, 0.0, 1.0, 77);
  auto path = stage(dir, data, ElementKind::f32, "cmb.fvecs");
  IndexConfig cfg;
  cfg.tau = 4;
  cfg.m = 4;
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);

  auto queries = hdtest::make_uniform(10, 16, 0.0, 1.0, 78);
  for (u64 qi = 0; qi < queries.size(); ++qi) {
    auto tri = knn(idx, queries[qi], wide_open(200, 10), FilterMode::triangular);
    auto cmb = knn(idx, queries[qi], wide_open(200, 10), FilterMode::combined);
    REQUIRE(tri.ids() == cmb.ids());
  }
}

TEST_CASE("the candidate funnel narrows tree by tree") {
  TempDir dir;
  auto data = hdtest::make_uniform(500, 16, 0.0, 1.0, 55);
  auto path = stage(dir, data, ElementKind::f32, "st.fvecs");
  IndexConfig cfg;
  cfg.tau = 4;
  cfg.m = 4;
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);

  QueryParams p;
  p.k = 5;
  p.alpha = 64;
  p.beta = 32;
  p.gamma = 16;
  auto q = hdtest::make_uniform(1, 16, 0.0, 1.0, 56);

  for (FilterMode mode : {FilterMode::triangular, FilterMode::combined}) {
    QueryStats st;
    auto res = knn(idx, q[0], p, mode, &st);
    CHECK(res.hits.size() == 5);
    REQUIRE(st.per_tree_fetched.size() == 4);
    REQUIRE(st.per_tree_survivors.size() == 4);
    for (u64 f : st.per_tree_fetched) CHECK(f == 64);
    for (u64 s : st.per_tree_survivors) CHECK(s == 16);
    CHECK(st.gamma_floor == 16);
    CHECK(st.kappa >= st.gamma_floor);
    CHECK(st.kappa <= 4 * st.gamma_floor);
    CHECK(st.reranked == st.kappa);  // nothing deleted
  }
}

TEST_CASE("deleted objects never appear in results") {
  TempDir dir;
  auto data = hdtest::make_uniform(200, 8, 0.0, 1.0, 91);
  auto path = stage(dir, data, ElementKind::f32, "del.fvecs");
  IndexConfig cfg;
  cfg.tau = 2;
  cfg.m = 3;
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);

  auto q = hdtest::make_uniform(1, 8, 0.0, 1.0, 92);
  auto before = knn(idx, q[0], wide_open(200, 10));

  // Remove the query's current top hit plus a spread of other ids.
  std::vector<u64> victims = {before.hits[0].id};
  for (u64 id = 3; id < 200; id += 13) {
    if (id != victims[0]) victims.push_back(id);
  }
  for (u64 id : victims) idx.delete_object(id);

  auto after = knn(idx, q[0], wide_open(200, 10));
  REQUIRE(after.hits.size() == 10);
  for (const auto& h : after.hits) {
    CHECK(std::find(victims.begin(), victims.end(), h.id) == victims.end());
  }

  // Against a hand-rolled exact scan over the survivors.
  std::vector<ResultSet::Hit> oracle;
  for (u64 id = 0; id < 200; ++id) {
    if (std::find(victims.begin(), victims.end(), id) != victims.end()) continue;
    oracle.push_back({id, euclidean(q[0], data[id])});
  }
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    return a.dist != b.dist ? a.dist < b.dist : a.id < b.id;
  });
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(after.hits[i].id == oracle[i].id);
    CHECK(after.hits[i].dist == oracle[i].dist);
  }
}

TEST_CASE("growing the probe width never worsens the answer") {
  TempDir dir;
  auto data = hdtest::make_uniform(1000, 16, 0.0, 1.0, 33);
  auto path = stage(dir, data, ElementKind::f32, "mono.fvecs");
  IndexConfig cfg;
  cfg.m = 4;
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);

  auto queries = hdtest::make_uniform(5, 16, 0.0, 1.0, 34);
  for (u64 qi = 0; qi < queries.size(); ++qi) {
    double prev = std::numeric_limits<double>::infinity();
    for (u64 alpha : {16ull, 64ull, 1000ull}) {
      auto res = knn(idx, queries[qi], wide_open(alpha, 10));
      double total = 0.0;
      for (const auto& h : res.hits) total += h.dist;
      REQUIRE(res.hits.size() == 10);
      CHECK(total <= prev + 1e-12);
      prev = total;
    }
    // At alpha = n the result is exact.
    auto exact = exact_knn(data, queries[qi], 10);
    auto res = knn(idx, queries[qi], wide_open(1000, 10));
    CHECK(res.ids() == exact.ids());
  }
}

TEST_CASE("queries answer identically after a persist and load cycle") {
  TempDir dir;
  auto data = hdtest::make_uniform(300, 8, 0.0, 1.0, 61);
  auto path = stage(dir, data, ElementKind::f32, "pl.fvecs");
  IndexConfig cfg;
  cfg.tau = 2;
  cfg.m = 3;
  auto built = HDIndex::build(data, ElementKind::f32, cfg, path);
  built.persist(dir.file("pl.hdx"));
  auto loaded = HDIndex::load(dir.file("pl.hdx"));

  QueryParams p;
  p.k = 7;
  p.alpha = 40;
  auto queries = hdtest::make_uniform(10, 8, 0.0, 1.0, 62);
  for (u64 qi = 0; qi < queries.size(); ++qi) {
    auto a = knn(built, queries[qi], p);
    auto b = knn(loaded, queries[qi], p);
    REQUIRE(a.hits.size() == b.hits.size());
    for (std::size_t i = 0; i < a.hits.size(); ++i) {
      CHECK(a.hits[i].id == b.hits[i].id);
      CHECK(a.hits[i].dist == b.hits[i].dist);
    }
  }
}

TEST_CASE("an empty or fully deleted index returns nothing") {
  TempDir dir;
  Dataset empty(4, 0.0, 1.0);
  auto epath = dir.file("e.fvecs");
  write_vecs(epath, empty, ElementKind::f32);
  auto eidx = HDIndex::build(empty, ElementKind::f32, IndexConfig{}, epath);
  std::vector<double> q{0.5, 0.5, 0.5, 0.5};
  CHECK(knn(eidx, q, wide_open(8, 3)).hits.empty());

  auto data = hdtest::make_uniform(5, 4, 0.0, 1.0, 41);
  auto path = stage(dir, data, ElementKind::f32, "f.fvecs");
  IndexConfig cfg;
  cfg.tau = 2;
  cfg.m = 2;
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);
  for (u64 id = 0; id < 5; ++id) idx.delete_object(id);
  CHECK(knn(idx, q, wide_open(5, 3)).hits.empty());
}

TEST_CASE("query validation catches bad input early") {
  TempDir dir;
  auto data = hdtest::make_uniform(50, 8, 0.0, 1.0, 71);
  auto path = stage(dir, data, ElementKind::f32, "v.fvecs");
  IndexConfig cfg;
  cfg.tau = 2;
  cfg.m = 3;
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);

  std::vector<double> good(8, 0.5);
  std::vector<double> narrow(3, 0.5);
  std::vector<double> poisoned(8, 0.5);
  poisoned[2] = std::nan("");

  QueryParams ok;
  ok.k = 1;
  CHECK(error_kind([&] { knn(idx, narrow, ok); }) == errc::data);
  CHECK(error_kind([&] { knn(idx, poisoned, ok); }) == errc::data);

  QueryParams zero_k;
  zero_k.k = 0;
  CHECK(error_kind([&] { knn(idx, good, zero_k); }) == errc::config);

  QueryParams inverted;
  inverted.k = 1;
  inverted.alpha = 10;
  inverted.beta = 20;
  CHECK(error_kind([&] { knn(idx, good, inverted); }) == errc::config);

  QueryParams k_too_deep;
  k_too_deep.k = 30;
  k_too_deep.gamma = 10;
  CHECK(error_kind([&] { knn(idx, good, k_too_deep); }) == errc::config);
}

TEST_CASE("combined filtering requires at least two references") {
  TempDir dir;
  auto data = hdtest::make_uniform(10, 4, 0.0, 1.0, 81);
  auto path = stage(dir, data, ElementKind::f32, "one.fvecs");
  IndexConfig cfg;
  cfg.tau = 2;
  cfg.fixed_refs = {0};
  auto idx = HDIndex::build(data, ElementKind::f32, cfg, path);

  std::vector<double> q(4, 0.5);
  QueryParams p;
  p.k = 1;
  CHECK(knn(idx, q, p, FilterMode::triangular).hits.size() == 1);
  CHECK(error_kind([&] { knn(idx, q, p, FilterMode::combined); }) == errc::config);
}
