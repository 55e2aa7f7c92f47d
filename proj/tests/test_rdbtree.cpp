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
#include <random>
#include <set>
#include <vector>

#include "hdindex/rdbtree.hpp"
#include "synth.hpp"

using namespace hdindex;
using hdtest::error_kind;

namespace {

// Tests use 2-byte keys so every key fits a u64 and arithmetic oracles stay
// exact and readable.
auto key16(u64 v) -> HilbertKey {
  HilbertKey k;
  k.bytes = {static_cast<u8>(v >> 8), static_cast<u8>(v & 0xff)};
  return k;
}

auto keyval(const HilbertKey& k) -> u64 {
  u64 v = 0;
  for (u8 b : k.bytes) v = (v << 8) | b;
  return v;
}

auto entry16(u64 key, u64 id, u32 m = 1) -> LeafEntry {
  LeafEntry e;
  e.key = key16(key);
  e.id = id;
  e.refdists.assign(m, static_cast<float>(id) * 0.5f);
  return e;
}

// Unique random (key, id) pairs, shuffled. Optionally with forced key
// collisions to exercise equal-key handling.
auto random_entries(u64 n, u64 key_space, u64 seed) -> std::vector<LeafEntry> {
  std::mt19937_64 rng(seed);
  std::set<std::pair<u64, u64>> used;
  std::vector<LeafEntry> out;
  std::uniform_int_distribution<u64> kd(0, key_space - 1);
  u64 id = 0;
  while (out.size() < n) {
    u64 k = kd(rng);
    if (!used.insert({k, id}).second) continue;
    out.push_back(entry16(k, id++));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

auto sorted_copy(std::vector<LeafEntry> v) -> std::vector<LeafEntry> {
  std::sort(v.begin(), v.end(), [](const LeafEntry& a, const LeafEntry& b) {
    if (!(a.key == b.key)) return a.key < b.key;
    return a.id < b.id;
  });
  return v;
}

void expect_same_sequence(const std::vector<LeafEntry>& got, const std::vector<LeafEntry>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    REQUIRE(got[i].key == want[i].key);
    REQUIRE(got[i].id == want[i].id);
  }
}

// Linear-scan oracle for nearest(): order all entries by (|key - probe|, key,
// id) using plain integer arithmetic.
auto nearest_oracle(const std::vector<LeafEntry>& all, u64 probe, u64 alpha)
    -> std::vector<LeafEntry> {
  auto v = all;
  std::sort(v.begin(), v.end(), [&](const LeafEntry& a, const LeafEntry& b) {
    u64 ka = keyval(a.key), kb = keyval(b.key);
    u64 da = ka > probe ? ka - probe : probe - ka;
    u64 db = kb > probe ? kb - probe : probe - kb;
    if (da != db) return da < db;
    if (ka != kb) return ka < kb;
    return a.id < b.id;
  });
  if (v.size() > alpha) v.resize(alpha);
  return v;
}

}  // namespace

TEST_CASE("leaf order matches the published page-size table") {
  // 4 KB pages, 10 reference distances per entry.
  CHECK(leaf_order(16, 8, 10, 4096) == 63);   // 128-dim bytes over 8 trees
  CHECK(leaf_order(16, 32, 10, 4096) == 36);  // 128-dim scaled reals over 8 trees
  CHECK(leaf_order(64, 32, 10, 4096) == 13);  // 512-dim over 8 trees
  CHECK(leaf_order(24, 32, 10, 4096) == 28);  // 192-dim over 8 trees
  CHECK(leaf_order(37, 16, 10, 4096) == 33);  // 1369-dim over 37 trees
  CHECK(leaf_order(10, 32, 10, 4096) == 46);  // 100-dim over 10 trees
}

TEST_CASE("leaf order is maximal for the page") {
  for (auto [eta, omega] : std::vector<std::pair<u32, u32>>{
           {16, 8}, {16, 32}, {64, 32}, {24, 32}, {37, 16}, {10, 32}}) {
    const u64 entry = static_cast<u64>(eta) * (omega / 8) + 4ull * 10 + 8ull;
    const u64 cap = leaf_order(eta, omega, 10, 4096);
    CHECK(entry * cap + 17 <= 4096);       // what we claim fits, fits
    CHECK(entry * (cap + 1) + 17 > 4096);  // one more entry would not
  }
}

TEST_CASE("leaf order rejects unusable parameters") {
  CHECK(error_kind([] { leaf_order(16, 7, 10, 4096); }) == errc::config);
  CHECK(error_kind([] { leaf_order(16, 0, 10, 4096); }) == errc::config);
  CHECK(error_kind([] { leaf_order(0, 8, 10, 4096); }) == errc::config);
  CHECK(error_kind([] { leaf_order(16, 8, 0, 4096); }) == errc::config);
  // Page too small for even one entry.
  CHECK(error_kind([] { leaf_order(64, 32, 10, 128); }) == errc::config);
}

TEST_CASE("bulk build round-trips a small sorted sequence") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 1);

  std::vector<LeafEntry> entries;
  for (u64 i = 0; i < 10; ++i) entries.push_back(entry16(i * 100, i));
  tree.bulk_build(entries);

  CHECK(tree.count() == 10);
  expect_same_sequence(tree.scan(), entries);
  auto st = tree.check();
  CHECK(st.entries == 10);
  CHECK(st.leaves == 1);  // 10 entries fit one 4 KB leaf
  CHECK(st.depth == 1);

  // Reference distances survive the disk round-trip exactly (f32 in, f32 out).
  auto back = tree.scan();
  for (std::size_t i = 0; i < back.size(); ++i) {
    REQUIRE(back[i].refdists.size() == 1);
    CHECK(back[i].refdists[0] == static_cast<float>(i) * 0.5f);
  }
}

TEST_CASE("bulk build validates its input") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 1);

  SECTION("unsorted input") {
    std::vector<LeafEntry> bad{entry16(200, 0), entry16(100, 1)};
    CHECK(error_kind([&] { tree.bulk_build(bad); }) == errc::data);
  }
  SECTION("duplicate (key, id) pair") {
    std::vector<LeafEntry> bad{entry16(100, 0), entry16(100, 0)};
    CHECK(error_kind([&] { tree.bulk_build(bad); }) == errc::data);
  }
  SECTION("equal keys with ascending ids are fine") {
    std::vector<LeafEntry> ok{entry16(100, 0), entry16(100, 1), entry16(100, 2)};
    tree.bulk_build(ok);
    CHECK(tree.count() == 3);
  }
  SECTION("wrong key width") {
    LeafEntry e;
    e.key.bytes = {0x01};  // tree expects 2 bytes
    e.refdists = {0.0f};
    CHECK(error_kind([&] { tree.bulk_build({e}); }) == errc::data);
  }
  SECTION("wrong reference-distance count") {
    auto e = entry16(5, 0, 3);
    CHECK(error_kind([&] { tree.bulk_build({e}); }) == errc::data);
  }
  SECTION("double build") {
    tree.bulk_build({entry16(1, 0)});
    CHECK(error_kind([&] { tree.bulk_build({entry16(2, 1)}); }) == errc::config);
  }
}

TEST_CASE("bulk build spreads entries over the computed leaf count") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 256);  // tiny pages force real structure
  auto tree = RdbTree::create(pf.store(), 2, 1);
  const u64 cap = tree.leaf_capacity();
  REQUIRE(cap >= 2);

  auto entries = sorted_copy(random_entries(1000, 50000, 77));
  tree.bulk_build(entries);

  auto st = tree.check();
  CHECK(st.entries == 1000);
  CHECK(st.leaves == (1000 + cap - 1) / cap);
  CHECK(st.depth >= 3);  // 1000 entries on 256-byte pages cannot be flat
  expect_same_sequence(tree.scan(), entries);
}

TEST_CASE("large bulk build against the sort oracle") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 1);

  auto entries = random_entries(100000, 60000, 3);  // plenty of equal-key runs
  auto want = sorted_copy(entries);
  tree.bulk_build(want);
  CHECK(tree.count() == 100000);
  expect_same_sequence(tree.scan(), want);
  tree.check();
}

TEST_CASE("nearest matches the linear oracle") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 256);
  auto tree = RdbTree::create(pf.store(), 2, 1);
  auto entries = random_entries(2000, 8192, 9);  // dense keyspace: many ties
  auto want_all = sorted_copy(entries);
  tree.bulk_build(want_all);
  tree.check();

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<u64> pd(0, 65535);
  for (int trial = 0; trial < 200; ++trial) {
    const u64 probe = pd(rng);
    for (u64 alpha : {1ull, 7ull, 64ull}) {
      auto got = tree.nearest(key16(probe), alpha);
      auto want = nearest_oracle(want_all, probe, alpha);
      expect_same_sequence(got, want);
    }
  }

  // alpha beyond the population returns everything, closest first.
  auto all = tree.nearest(key16(1234), 5000);
  auto want = nearest_oracle(want_all, 1234, 5000);
  expect_same_sequence(all, want);
}

TEST_CASE("nearest answers grow consistently with alpha") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 1);
  auto entries = sorted_copy(random_entries(500, 4096, 15));
  tree.bulk_build(entries);

  // A larger alpha extends the answer without reordering its prefix.
  auto small = tree.nearest(key16(2000), 10);
  auto big = tree.nearest(key16(2000), 40);
  REQUIRE(big.size() >= small.size());
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK(small[i].id == big[i].id);
    CHECK(small[i].key == big[i].key);
  }
}

TEST_CASE("nearest edge cases") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 1);

  CHECK(tree.nearest(key16(5), 3).empty());  // empty tree
  CHECK(error_kind([&] { tree.nearest(key16(5), 0); }) == errc::config);

  HilbertKey narrow;
  narrow.bytes = {0x01};
  CHECK(error_kind([&] { tree.nearest(narrow, 1); }) == errc::data);
}

TEST_CASE("inserts build the same ordered structure as sorting up front") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 256);
  auto tree = RdbTree::create(pf.store(), 2, 1);

  // Distinct keys: physical order is fully determined, so the scan must equal
  // the sorted sequence exactly.
  std::mt19937_64 rng(8);
  std::vector<u64> keys(3000);
  std::set<u64> used;
  for (auto& k : keys) {
    do {
      k = std::uniform_int_distribution<u64>(0, 65535)(rng);
    } while (!used.insert(k).second);
  }
  std::vector<LeafEntry> entries;
  for (u64 i = 0; i < keys.size(); ++i) entries.push_back(entry16(keys[i], i));

  for (const auto& e : entries) tree.insert(e);
  CHECK(tree.count() == entries.size());
  expect_same_sequence(tree.scan(), sorted_copy(entries));
  tree.check();
}

TEST_CASE("inserts with heavy key collisions keep the tree consistent") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 256);
  auto tree = RdbTree::create(pf.store(), 2, 1);

  auto entries = random_entries(2000, 64, 21);  // 64 distinct keys for 2000 entries
  for (const auto& e : entries) tree.insert(e);
  CHECK(tree.count() == entries.size());
  tree.check();  // keys non-decreasing, leaves internally (key, id)-sorted

  // The multiset of stored (key, id) pairs is exactly the input.
  auto got = tree.scan();
  auto want = sorted_copy(entries);
  REQUIRE(got.size() == want.size());
  std::vector<std::pair<u64, u64>> gp, wp;
  for (auto& e : got) gp.push_back({keyval(e.key), e.id});
  for (auto& e : want) wp.push_back({keyval(e.key), e.id});
  std::sort(gp.begin(), gp.end());
  std::sort(wp.begin(), wp.end());
  CHECK(gp == wp);

  // And retrieval stays canonical regardless of physical placement.
  for (u64 probe : {0ull, 31ull, 63ull, 65535ull}) {
    auto got_n = tree.nearest(key16(probe), 25);
    auto want_n = nearest_oracle(entries, probe, 25);
    expect_same_sequence(got_n, want_n);
  }
}

TEST_CASE("ascending and descending insert orders both stay balanced enough") {
  hdtest::TempDir tmp;
  for (bool ascending : {true, false}) {
    PageFile pf(tmp.file(ascending ? "a.pages" : "d.pages"), 256);
    auto tree = RdbTree::create(pf.store(), 2, 1);
    for (u64 i = 0; i < 1500; ++i) {
      u64 k = ascending ? i * 40 : (1500 - i) * 40;
      tree.insert(entry16(k % 60000, i));
    }
    auto st = tree.check();
    CHECK(st.entries == 1500);
  }
}

TEST_CASE("mixed bulk build then inserts") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 1);

  auto base = sorted_copy(random_entries(400, 30000, 2));
  tree.bulk_build(base);
  auto extra = random_entries(200, 30000, 6);
  // Shift ids so the two batches cannot collide on (key, id).
  for (auto& e : extra) e.id += 1000;
  for (const auto& e : extra) tree.insert(e);

  CHECK(tree.count() == 600);
  tree.check();

  auto all = base;
  all.insert(all.end(), extra.begin(), extra.end());
  for (u64 probe : {100ull, 15000ull, 29999ull}) {
    expect_same_sequence(tree.nearest(key16(probe), 50), nearest_oracle(all, probe, 50));
  }
}

TEST_CASE("trees reopen from their header page") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 3);
  std::vector<LeafEntry> entries;
  for (u64 i = 0; i < 50; ++i) entries.push_back(entry16(i * 7, i, 3));
  tree.bulk_build(entries);
  const u64 hdr = tree.header_page();

  auto again = RdbTree::open(pf.store(), hdr);
  CHECK(again.count() == 50);
  CHECK(again.key_bytes() == 2);
  CHECK(again.height() == tree.height());
  expect_same_sequence(again.scan(), entries);
  again.check();

  // A non-header page is rejected.
  CHECK(error_kind([&] { RdbTree::open(pf.store(), 2); }) == errc::data);
}

TEST_CASE("check detects a corrupted leaf") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("t.pages"), 4096);
  auto tree = RdbTree::create(pf.store(), 2, 1);
  tree.bulk_build({entry16(10, 0), entry16(20, 1), entry16(30, 2)});
  tree.check();

  // Single-leaf tree: the root recorded in the header page is the leaf.
  std::vector<u8> hdr;
  pf.store().read(tree.header_page(), hdr);
  const u64 leaf = load_le<u64>(hdr.data() + 1);

  std::vector<u8> page;
  pf.store().read(leaf, page);
  page[19] = 0xFF;  // first entry's key now exceeds its successors
  page[20] = 0xFF;
  pf.store().write(leaf, page);

  CHECK(error_kind([&] { tree.check(); }) == errc::internal);
}

TEST_CASE("page store allocates, frees, and recycles") {
  hdtest::TempDir tmp;
  PageFile pf(tmp.file("p.pages"), 256);
  auto& ps = pf.store();

  const u64 a = ps.alloc();
  const u64 b = ps.alloc();
  CHECK(a != b);
  CHECK(a != PageStore::kNoPage);
  CHECK(ps.page_count() == 3);  // header + two
  CHECK(ps.region_bytes() == 3 * 256);

  std::vector<u8> buf;
  ps.read(a, buf);
  CHECK(std::all_of(buf.begin(), buf.end(), [](u8 c) { return c == 0; }));

  buf[0] = 0xAB;
  ps.write(a, buf);
  std::vector<u8> back;
  ps.read(a, back);
  CHECK(back[0] == 0xAB);

  ps.free_page(a);
  const u64 c = ps.alloc();
  CHECK(c == a);  // freed page recycled first
  ps.read(c, buf);
  CHECK(std::all_of(buf.begin(), buf.end(), [](u8 v) { return v == 0; }));  // and zeroed

  CHECK(error_kind([&] { ps.read(0, buf); }) == errc::internal);   // header not readable as page
  CHECK(error_kind([&] { ps.read(99, buf); }) == errc::internal);  // out of range
  CHECK(error_kind([] {
          PageFile small("/tmp/hdindex-too-small.pages", 64);
        }) == errc::config);
}
