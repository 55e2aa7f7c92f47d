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

#ifndef HDINDEX_RDBTREE_HPP
#define HDINDEX_RDBTREE_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "hdindex/hilbert.hpp"
#include "hdindex/pagestore.hpp"

namespace hdindex {

/**
 * @brief Leaf fan-out for a page of B bytes: the largest count such that
 * entries of (eta * omega / 8) key bytes + 4 bytes per reference distance +
 * an 8-byte id, plus 17 bytes of page overhead, fit. With the 4 KB default
 * this gives 63 entries for 16 dims at 8 bits, 36 for 16 dims at 32 bits,
 * 13 for 64 dims at 32 bits, 28 for 24 dims at 32 bits, and so on.
 */
inline auto leaf_order(u32 eta, u32 omega, u32 m, u32 page_size) -> u64 {
  require(eta >= 1 && m >= 1 && page_size >= 1, errc::config,
          "leaf_order: eta, m, and page size must be positive");
  require(omega >= 8 && omega % 8 == 0, errc::config,
          "leaf_order: omega must be a positive multiple of 8");
  const u64 entry = static_cast<u64>(eta) * (omega / 8) + 4ull * m + 8ull;
  require(page_size >= 17 + entry, errc::config,
          "leaf_order: page of " + std::to_string(page_size) +
              " bytes cannot hold a single entry of " + std::to_string(entry) + " bytes");
  return (page_size - 17) / entry;
}

/// One indexed object as a leaf stores it: curve position, distances to the
/// reference objects (single precision on disk), and the object id.
struct LeafEntry {
  HilbertKey key;
  u64 id = 0;
  std::vector<float> refdists;
};

/**
 * @brief B+-tree keyed by Hilbert positions, leaves chained for ordered scans.
 *
 * Page layout (all integers little-endian, keys raw big-endian bytes):
 *   leaf:     [0] flag=1 | [1,8] left sibling | [9,16] right sibling |
 *             [17,18] entry count | entries (key | m * f32 | id u64)
 *   internal: [0] flag=0 | [1,2] slot count | slots (key | child u64),
 *             slot key = smallest key in the child's subtree
 *   header:   [0] flag=2 | root u64 | count u64 | height u32 | key width u32 |
 *             reference count u32
 *
 * Routing uses keys only; within a leaf, entries sort by (key, id). A child's
 * recorded minimum can go stale only for the leftmost child (inserts below the
 * global minimum route there by default), which routing never consults; splits
 * refresh it before placing a new separator beside it.
 */
class RdbTree {
 public:
  static constexpr u8 kLeafFlag = 1;
  static constexpr u8 kInternalFlag = 0;
  static constexpr u8 kHeaderFlag = 2;

  RdbTree() = default;

  static auto create(PageStore& store, u32 key_bytes, u32 m) -> RdbTree {
    RdbTree t;
    t.store_ = &store;
    t.key_bytes_ = key_bytes;
    t.m_ = m;
    t.compute_geometry();
    t.header_page_ = store.alloc();
    t.write_header();
    return t;
  }

  static auto open(PageStore& store, u64 header_page) -> RdbTree {
    RdbTree t;
    t.store_ = &store;
    t.header_page_ = header_page;
    std::vector<u8> buf;
    store.read(header_page, buf);
    require(buf[0] == kHeaderFlag, errc::data, "RdbTree: page is not a tree header");
    t.root_ = load_le<u64>(buf.data() + 1);
    t.count_ = load_le<u64>(buf.data() + 9);
    t.height_ = load_le<u32>(buf.data() + 17);
    t.key_bytes_ = load_le<u32>(buf.data() + 21);
    t.m_ = load_le<u32>(buf.data() + 25);
    t.compute_geometry();
    return t;
  }

  auto header_page() const -> u64 { return header_page_; }
  auto count() const -> u64 { return count_; }
  auto height() const -> u32 { return height_; }
  auto key_bytes() const -> u32 { return key_bytes_; }
  auto leaf_capacity() const -> u64 { return leaf_cap_; }
  auto fanout() const -> u64 { return theta_; }

  /*--------------------------------------------------------------------------*
   * Bulk build
   *--------------------------------------------------------------------------*/

  /// Packs pre-sorted entries bottom-up. Entries must be strictly increasing
  /// by (key, id); the tree must be empty.
  void bulk_build(const std::vector<LeafEntry>& entries) {
    require(root_ == PageStore::kNoPage && count_ == 0, errc::config,
            "bulk_build: tree already holds entries");
    for (std::size_t i = 0; i < entries.size(); ++i) {
      check_entry(entries[i]);
      if (i > 0) {
        const auto& a = entries[i - 1];
        const auto& b = entries[i];
        bool ordered = a.key < b.key || (a.key == b.key && a.id < b.id);
        require(ordered, errc::data,
                "bulk_build: entries not strictly sorted by (key, id) at position " +
                    std::to_string(i));
      }
    }
    if (entries.empty()) {
      write_header();
      return;
    }

    // Spread entries evenly over the minimum number of leaves so no leaf ends
    // up nearly empty.
    const u64 n = entries.size();
    const u64 n_leaves = (n + leaf_cap_ - 1) / leaf_cap_;
    std::vector<u64> pages(n_leaves);
    for (u64 i = 0; i < n_leaves; ++i) pages[i] = store_->alloc();

    std::vector<std::pair<HilbertKey, u64>> level;  // (subtree min key, page)
    level.reserve(n_leaves);
    const u64 base = n / n_leaves;
    const u64 extra = n % n_leaves;
    u64 at = 0;
    std::vector<u8> buf(store_->page_size(), 0);
    for (u64 li = 0; li < n_leaves; ++li) {
      const u64 take = base + (li < extra ? 1 : 0);
      std::fill(buf.begin(), buf.end(), 0);
      buf[0] = kLeafFlag;
      store_le<u64>(buf.data() + 1, li > 0 ? pages[li - 1] : PageStore::kNoPage);
      store_le<u64>(buf.data() + 9, li + 1 < n_leaves ? pages[li + 1] : PageStore::kNoPage);
      store_le<u16>(buf.data() + 17, static_cast<u16>(take));
      for (u64 e = 0; e < take; ++e) {
        encode_entry(buf, e, entries[at + e]);
      }
      store_->write(pages[li], buf);
      level.emplace_back(entries[at].key, pages[li]);
      at += take;
    }

    u32 height = 1;
    while (level.size() > 1) {
      const u64 n_nodes = (level.size() + theta_ - 1) / theta_;
      const u64 nb = level.size() / n_nodes;
      const u64 ne = level.size() % n_nodes;
      std::vector<std::pair<HilbertKey, u64>> next;
      next.reserve(n_nodes);
      u64 from = 0;
      for (u64 ni = 0; ni < n_nodes; ++ni) {
        const u64 take = nb + (ni < ne ? 1 : 0);
        const u64 page = store_->alloc();
        std::fill(buf.begin(), buf.end(), 0);
        buf[0] = kInternalFlag;
        store_le<u16>(buf.data() + 1, static_cast<u16>(take));
        for (u64 s = 0; s < take; ++s) {
          write_slot(buf, s, level[from + s].first, level[from + s].second);
        }
        store_->write(page, buf);
        next.emplace_back(level[from].first, page);
        from += take;
      }
      level = std::move(next);
      ++height;
    }

    root_ = level[0].second;
    height_ = height;
    count_ = n;
    write_header();
  }

  /*--------------------------------------------------------------------------*
   * Point insert
   *--------------------------------------------------------------------------*/

  void insert(const LeafEntry& e) {
    check_entry(e);
    if (root_ == PageStore::kNoPage) {
      const u64 page = store_->alloc();
      std::vector<u8> buf(store_->page_size(), 0);
      buf[0] = kLeafFlag;
      store_le<u64>(buf.data() + 1, PageStore::kNoPage);
      store_le<u64>(buf.data() + 9, PageStore::kNoPage);
      store_le<u16>(buf.data() + 17, 1);
      encode_entry(buf, 0, e);
      store_->write(page, buf);
      root_ = page;
      height_ = 1;
      count_ = 1;
      write_header();
      return;
    }

    // Descend, remembering the path for split propagation.
    std::vector<PathNode> path;
    u64 cur = root_;
    std::vector<u8> buf;
    for (;;) {
      store_->read(cur, buf);
      if (buf[0] == kLeafFlag) break;
      require(buf[0] == kInternalFlag, errc::internal, "insert: unexpected page flag");
      const u16 n_slots = load_le<u16>(buf.data() + 1);
      u16 pos = route_slot(buf, n_slots, e.key);
      path.push_back({cur, pos});
      cur = slot_child(buf, pos);
    }

    // Insert into the leaf, splitting upward while nodes overflow.
    u16 n_entries = load_le<u16>(buf.data() + 17);
    u16 pos = leaf_position(buf, n_entries, e);
    if (n_entries < leaf_cap_) {
      shift_entries(buf, pos, n_entries);
      encode_entry(buf, pos, e);
      store_le<u16>(buf.data() + 17, static_cast<u16>(n_entries + 1));
      store_->write(cur, buf);
      ++count_;
      write_header();
      return;
    }

    // Leaf split: gather cap+1 entries, give the right half to a new page.
    std::vector<LeafEntry> all;
    all.reserve(n_entries + 1);
    for (u16 i = 0; i < n_entries; ++i) all.push_back(decode_entry(buf, i));
    all.insert(all.begin() + pos, e);
    const u64 split = (all.size() + 1) / 2;  // left keeps the larger half
    const u64 right_page = store_->alloc();
    const u64 old_right = load_le<u64>(buf.data() + 9);

    std::vector<u8> rbuf(store_->page_size(), 0);
    rbuf[0] = kLeafFlag;
    store_le<u64>(rbuf.data() + 1, cur);
    store_le<u64>(rbuf.data() + 9, old_right);
    store_le<u16>(rbuf.data() + 17, static_cast<u16>(all.size() - split));
    for (u64 i = split; i < all.size(); ++i) {
      encode_entry(rbuf, i - split, all[i]);
    }
    store_->write(right_page, rbuf);

    std::fill(buf.begin() + 17, buf.end(), 0);
    store_le<u16>(buf.data() + 17, static_cast<u16>(split));
    for (u64 i = 0; i < split; ++i) encode_entry(buf, i, all[i]);
    store_le<u64>(buf.data() + 9, right_page);
    store_->write(cur, buf);

    if (old_right != PageStore::kNoPage) {
      std::vector<u8> nb;
      store_->read(old_right, nb);
      store_le<u64>(nb.data() + 1, right_page);
      store_->write(old_right, nb);
    }

    propagate_split(path, all[split].key, right_page);
    ++count_;
    write_header();
  }

  /*--------------------------------------------------------------------------*
   * Queries
   *--------------------------------------------------------------------------*/

  /**
   * @brief The alpha entries whose keys lie closest to the probe position,
   * by absolute key difference. Walks the leaf chain outward from the probe's
   * landing point; runs of equal difference at the boundary are fully
   * collected before the final (difference, key, id) sort truncates to alpha,
   * so the result is insensitive to physical entry order among ties.
   */
  auto nearest(const HilbertKey& probe, u64 alpha) -> std::vector<LeafEntry> {
    require(alpha >= 1, errc::config, "nearest: alpha must be at least 1");
    require(probe.bytes.size() == key_bytes_, errc::data, "nearest: probe key width mismatch");
    if (root_ == PageStore::kNoPage) return {};

    std::vector<u8> buf;
    u64 cur = root_;
    for (;;) {
      store_->read(cur, buf);
      if (buf[0] == kLeafFlag) break;
      const u16 n_slots = load_le<u16>(buf.data() + 1);
      cur = slot_child(buf, route_slot(buf, n_slots, probe));
    }

    // Two cursors on the leaf chain: left covers keys <= probe, right the rest.
    struct Cursor {
      u64 page = PageStore::kNoPage;
      std::vector<u8> buf;
      i64 idx = -1;
      bool valid = false;
    };
    Cursor left, right;
    {
      const u16 n_entries = load_le<u16>(buf.data() + 17);
      u16 gt = 0;  // first entry with key > probe
      while (gt < n_entries && !(probe < entry_key_copy(buf, gt))) ++gt;
      left.page = cur;
      left.buf = buf;
      left.idx = static_cast<i64>(gt) - 1;
      right.page = cur;
      right.buf = buf;
      right.idx = gt;
      normalize_back(left);
      normalize_fwd(right, n_entries);
    }

    struct Cand {
      std::vector<u8> diff;
      LeafEntry entry;
    };
    std::vector<Cand> out;
    out.reserve(alpha + 8);
    auto take = [&](Cursor& c, bool backward) {
      LeafEntry e = decode_entry(c.buf, static_cast<u16>(c.idx));
      out.push_back({key_abs_diff(e.key, probe), std::move(e)});
      if (backward) {
        --c.idx;
        normalize_back(c);
      } else {
        ++c.idx;
        normalize_fwd(c, load_le<u16>(c.buf.data() + 17));
      }
    };
    auto diff_of = [&](const Cursor& c) -> std::vector<u8> {
      return key_abs_diff(entry_key_copy(c.buf, static_cast<u16>(c.idx)), probe);
    };

    while (out.size() < alpha && (left.valid || right.valid)) {
      if (!right.valid) {
        take(left, true);
      } else if (!left.valid) {
        take(right, false);
      } else {
        // Tie goes left: equal difference means the left key is the smaller.
        if (diff_of(right) < diff_of(left)) {
          take(right, false);
        } else {
          take(left, true);
        }
      }
    }
    if (!out.empty()) {
      std::vector<u8> maxdiff;
      for (const auto& c : out) maxdiff = std::max(maxdiff, c.diff);
      while (left.valid && diff_of(left) == maxdiff) take(left, true);
      while (right.valid && diff_of(right) == maxdiff) take(right, false);
    }

    std::sort(out.begin(), out.end(), [](const Cand& a, const Cand& b) {
      if (a.diff != b.diff) return a.diff < b.diff;
      if (a.entry.key != b.entry.key) return a.entry.key < b.entry.key;
      return a.entry.id < b.entry.id;
    });
    if (out.size() > alpha) out.resize(alpha);

    std::vector<LeafEntry> result;
    result.reserve(out.size());
    for (auto& c : out) result.push_back(std::move(c.entry));
    return result;
  }

  /// Every entry in leaf-chain (key) order.
  auto scan() const -> std::vector<LeafEntry> {
    std::vector<LeafEntry> out;
    out.reserve(count_);
    if (root_ == PageStore::kNoPage) return out;
    std::vector<u8> buf;
    u64 cur = root_;
    for (;;) {
      store_->read(cur, buf);
      if (buf[0] == kLeafFlag) break;
      cur = slot_child(buf, 0);
    }
    while (cur != PageStore::kNoPage) {
      store_->read(cur, buf);
      const u16 n_entries = load_le<u16>(buf.data() + 17);
      for (u16 i = 0; i < n_entries; ++i) out.push_back(decode_entry(buf, i));
      cur = load_le<u64>(buf.data() + 9);
    }
    return out;
  }

  /*--------------------------------------------------------------------------*
   * Structural validation (test support)
   *--------------------------------------------------------------------------*/

  struct CheckStats {
    u64 leaves = 0;
    u64 entries = 0;
    u32 depth = 0;
  };

  /// Walks the whole tree and throws on any broken structural invariant.
  auto check() const -> CheckStats {
    CheckStats st;
    if (root_ == PageStore::kNoPage) {
      require(count_ == 0 && height_ == 0, errc::internal, "check: empty tree with nonzero size");
      return st;
    }
    u64 first_leaf = PageStore::kNoPage;
    check_node(root_, 1, st, first_leaf);

    // Leaf chain: reciprocal links and globally non-decreasing keys.
    std::vector<u8> buf;
    u64 prev = PageStore::kNoPage;
    u64 cur = first_leaf;
    HilbertKey last_key;
    bool have_last = false;
    u64 chained = 0;
    while (cur != PageStore::kNoPage) {
      store_->read(cur, buf);
      require(buf[0] == kLeafFlag, errc::internal, "check: chain reached a non-leaf");
      require(load_le<u64>(buf.data() + 1) == prev, errc::internal,
              "check: leaf back-pointer mismatch");
      const u16 n_entries = load_le<u16>(buf.data() + 17);
      for (u16 i = 0; i < n_entries; ++i) {
        HilbertKey k = entry_key_copy(buf, i);
        if (have_last) {
          require(!(k < last_key), errc::internal, "check: keys decrease along the leaf chain");
        }
        last_key = std::move(k);
        have_last = true;
      }
      ++chained;
      prev = cur;
      cur = load_le<u64>(buf.data() + 9);
    }
    require(chained == st.leaves, errc::internal, "check: leaf chain misses leaves");
    require(st.entries == count_, errc::internal, "check: entry count disagrees with header");
    require(st.depth == height_, errc::internal, "check: height disagrees with header");
    return st;
  }

 private:
  struct PathNode {
    u64 page;
    u16 slot;
  };

  void compute_geometry() {
    require(key_bytes_ >= 1, errc::config, "RdbTree: key width must be positive");
    const u64 entry = entry_bytes();
    const u32 B = store_->page_size();
    require(B >= 19 + entry, errc::config,
            "RdbTree: page of " + std::to_string(B) + " bytes cannot hold one entry of " +
                std::to_string(entry) + " bytes");
    leaf_cap_ = (B - 19) / entry;
    theta_ = (B - 3) / (static_cast<u64>(key_bytes_) + 8);
    // theta >= 3 keeps both halves of an internal split at two or more slots.
    require(theta_ >= 3, errc::config, "RdbTree: page too small for internal nodes");
    require(leaf_cap_ <= 0xffff && theta_ <= 0xffff, errc::config,
            "RdbTree: page so large that counts overflow 16 bits");
  }

  auto entry_bytes() const -> u64 { return static_cast<u64>(key_bytes_) + 4ull * m_ + 8ull; }

  void check_entry(const LeafEntry& e) const {
    require(e.key.bytes.size() == key_bytes_, errc::data,
            "RdbTree: entry key width " + std::to_string(e.key.bytes.size()) +
                " does not match tree key width " + std::to_string(key_bytes_));
    require(e.refdists.size() == m_, errc::data,
            "RdbTree: entry carries " + std::to_string(e.refdists.size()) +
                " reference distances, tree expects " + std::to_string(m_));
  }

  void write_header() {
    std::vector<u8> buf(store_->page_size(), 0);
    buf[0] = kHeaderFlag;
    store_le<u64>(buf.data() + 1, root_);
    store_le<u64>(buf.data() + 9, count_);
    store_le<u32>(buf.data() + 17, height_);
    store_le<u32>(buf.data() + 21, key_bytes_);
    store_le<u32>(buf.data() + 25, m_);
    store_->write(header_page_, buf);
  }

  /*------------------------------ leaf pages -------------------------------*/

  auto entry_off(u16 i) const -> std::size_t { return 19 + static_cast<std::size_t>(i) * entry_bytes(); }

  void encode_entry(std::vector<u8>& buf, u64 i, const LeafEntry& e) const {
    u8* p = buf.data() + entry_off(static_cast<u16>(i));
    std::memcpy(p, e.key.bytes.data(), key_bytes_);
    p += key_bytes_;
    for (u32 r = 0; r < m_; ++r) {
      store_f32_le(p, e.refdists[r]);
      p += 4;
    }
    store_le<u64>(p, e.id);
  }

  auto decode_entry(const std::vector<u8>& buf, u16 i) const -> LeafEntry {
    const u8* p = buf.data() + entry_off(i);
    LeafEntry e;
    e.key.bytes.assign(p, p + key_bytes_);
    p += key_bytes_;
    e.refdists.resize(m_);
    for (u32 r = 0; r < m_; ++r) {
      e.refdists[r] = load_f32_le(p);
      p += 4;
    }
    e.id = load_le<u64>(p);
    return e;
  }

  auto entry_key_copy(const std::vector<u8>& buf, u16 i) const -> HilbertKey {
    const u8* p = buf.data() + entry_off(i);
    HilbertKey k;
    k.bytes.assign(p, p + key_bytes_);
    return k;
  }

  auto entry_id(const std::vector<u8>& buf, u16 i) const -> u64 {
    return load_le<u64>(buf.data() + entry_off(i) + key_bytes_ + 4ull * m_);
  }

  void shift_entries(std::vector<u8>& buf, u16 from, u16 count) const {
    u8* base = buf.data();
    std::memmove(base + entry_off(static_cast<u16>(from + 1)), base + entry_off(from),
                 static_cast<std::size_t>(count - from) * entry_bytes());
  }

  /// Position by (key, id) among the leaf's entries.
  auto leaf_position(const std::vector<u8>& buf, u16 n_entries, const LeafEntry& e) const -> u16 {
    u16 pos = 0;
    while (pos < n_entries) {
      HilbertKey k = entry_key_copy(buf, pos);
      if (e.key < k) break;
      if (e.key == k && e.id < entry_id(buf, pos)) break;
      ++pos;
    }
    return pos;
  }

  /*---------------------------- internal pages -----------------------------*/

  auto slot_off(u16 i) const -> std::size_t {
    return 3 + static_cast<std::size_t>(i) * (key_bytes_ + 8ull);
  }

  void write_slot(std::vector<u8>& buf, u64 i, const HilbertKey& key, u64 child) const {
    u8* p = buf.data() + slot_off(static_cast<u16>(i));
    std::memcpy(p, key.bytes.data(), key_bytes_);
    store_le<u64>(p + key_bytes_, child);
  }

  auto slot_key(const std::vector<u8>& buf, u16 i) const -> HilbertKey {
    const u8* p = buf.data() + slot_off(i);
    HilbertKey k;
    k.bytes.assign(p, p + key_bytes_);
    return k;
  }

  auto slot_child(const std::vector<u8>& buf, u16 i) const -> u64 {
    return load_le<u64>(buf.data() + slot_off(i) + key_bytes_);
  }

  /// Rightmost slot whose recorded minimum does not exceed the key; keys below
  /// every separator fall through to slot 0.
  auto route_slot(const std::vector<u8>& buf, u16 n_slots, const HilbertKey& key) const -> u16 {
    require(n_slots >= 1, errc::internal, "route_slot: empty internal node");
    u16 pos = 0;
    while (pos + 1 < n_slots && !(key < slot_key(buf, static_cast<u16>(pos + 1)))) ++pos;
    return pos;
  }

  void propagate_split(std::vector<PathNode>& path, HilbertKey sep, u64 new_child) {
    std::vector<u8> buf;
    while (!path.empty()) {
      auto [page, slot] = path.back();
      path.pop_back();
      store_->read(page, buf);
      u16 n_slots = load_le<u16>(buf.data() + 1);
      const u16 at = static_cast<u16>(slot + 1);
      if (slot == 0) {
        // The leftmost child's recorded minimum can be stale: inserts below
        // the global minimum fall through to it without updating the key. The
        // split is about to place a fresh separator right of it, so re-derive
        // it from the child to keep the slot keys ordered.
        write_slot(buf, 0, subtree_min(slot_child(buf, 0)), slot_child(buf, 0));
      }
      if (n_slots < theta_) {
        u8* base = buf.data();
        std::memmove(base + slot_off(static_cast<u16>(at + 1)), base + slot_off(at),
                     static_cast<std::size_t>(n_slots - at) * (key_bytes_ + 8ull));
        write_slot(buf, at, sep, new_child);
        store_le<u16>(buf.data() + 1, static_cast<u16>(n_slots + 1));
        store_->write(page, buf);
        return;
      }

      // Internal split: keep the left half here, move the rest to a new page.
      std::vector<std::pair<HilbertKey, u64>> slots;
      slots.reserve(n_slots + 1);
      for (u16 i = 0; i < n_slots; ++i) slots.emplace_back(slot_key(buf, i), slot_child(buf, i));
      slots.insert(slots.begin() + at, {sep, new_child});
      const u64 split = (slots.size() + 1) / 2;
      const u64 right_page = store_->alloc();

      std::vector<u8> rbuf(store_->page_size(), 0);
      rbuf[0] = kInternalFlag;
      store_le<u16>(rbuf.data() + 1, static_cast<u16>(slots.size() - split));
      for (u64 i = split; i < slots.size(); ++i) {
        write_slot(rbuf, i - split, slots[i].first, slots[i].second);
      }
      store_->write(right_page, rbuf);

      std::fill(buf.begin() + 1, buf.end(), 0);
      buf[0] = kInternalFlag;
      store_le<u16>(buf.data() + 1, static_cast<u16>(split));
      for (u64 i = 0; i < split; ++i) write_slot(buf, i, slots[i].first, slots[i].second);
      store_->write(page, buf);

      sep = slots[split].first;
      new_child = right_page;
    }

    // The root itself split: grow the tree by one level.
    const u64 new_root = store_->alloc();
    std::vector<u8> buf2(store_->page_size(), 0);
    buf2[0] = kInternalFlag;
    store_le<u16>(buf2.data() + 1, 2);
    HilbertKey old_min = subtree_min(root_);
    write_slot(buf2, 0, old_min, root_);
    write_slot(buf2, 1, sep, new_child);
    store_->write(new_root, buf2);
    root_ = new_root;
    ++height_;
  }

  auto subtree_min(u64 page) const -> HilbertKey {
    std::vector<u8> buf;
    u64 cur = page;
    for (;;) {
      store_->read(cur, buf);
      if (buf[0] == kLeafFlag) return entry_key_copy(buf, 0);
      cur = slot_child(buf, 0);
    }
  }

  /*------------------------------ cursor help ------------------------------*/

  template <class Cursor>
  void normalize_back(Cursor& c) const {
    while (c.idx < 0) {
      const u64 prev = load_le<u64>(c.buf.data() + 1);
      if (prev == PageStore::kNoPage) {
        c.valid = false;
        return;
      }
      store_->read(prev, c.buf);
      c.page = prev;
      c.idx = static_cast<i64>(load_le<u16>(c.buf.data() + 17)) - 1;
    }
    c.valid = true;
  }

  template <class Cursor>
  void normalize_fwd(Cursor& c, u16 n_entries) const {
    while (c.idx >= static_cast<i64>(n_entries)) {
      const u64 next = load_le<u64>(c.buf.data() + 9);
      if (next == PageStore::kNoPage) {
        c.valid = false;
        return;
      }
      store_->read(next, c.buf);
      c.page = next;
      c.idx = 0;
      n_entries = load_le<u16>(c.buf.data() + 17);
    }
    c.valid = true;
  }

  void check_node(u64 page, u32 depth, CheckStats& st, u64& first_leaf) const {
    std::vector<u8> buf;
    store_->read(page, buf);
    if (buf[0] == kLeafFlag) {
      const u16 n_entries = load_le<u16>(buf.data() + 17);
      require(n_entries >= 1 && n_entries <= leaf_cap_, errc::internal,
              "check: leaf entry count out of range");
      for (u16 i = 1; i < n_entries; ++i) {
        HilbertKey a = entry_key_copy(buf, static_cast<u16>(i - 1));
        HilbertKey b = entry_key_copy(buf, i);
        bool ordered = a < b || (a == b && entry_id(buf, static_cast<u16>(i - 1)) < entry_id(buf, i));
        require(ordered, errc::internal, "check: leaf entries out of (key, id) order");
      }
      if (st.depth == 0) st.depth = depth;
      require(st.depth == depth, errc::internal, "check: leaves at different depths");
      if (first_leaf == PageStore::kNoPage && load_le<u64>(buf.data() + 1) == PageStore::kNoPage) {
        first_leaf = page;
      }
      ++st.leaves;
      st.entries += n_entries;
      return;
    }
    require(buf[0] == kInternalFlag, errc::internal, "check: unexpected page flag");
    const u16 n_slots = load_le<u16>(buf.data() + 1);
    require(n_slots >= 2 && n_slots <= theta_, errc::internal,
            "check: internal slot count out of range");
    for (u16 i = 1; i < n_slots; ++i) {
      require(!(slot_key(buf, i) < slot_key(buf, static_cast<u16>(i - 1))), errc::internal,
              "check: separators decrease");
    }
    for (u16 i = 0; i < n_slots; ++i) {
      if (i >= 1) {
        // For every child but the leftmost, the recorded separator is exact.
        require(subtree_min(slot_child(buf, i)) == slot_key(buf, i), errc::internal,
                "check: separator does not match child minimum");
      }
      check_node(slot_child(buf, i), depth + 1, st, first_leaf);
    }
  }

  PageStore* store_ = nullptr;
  u64 header_page_ = PageStore::kNoPage;
  u32 key_bytes_ = 0;
  u32 m_ = 0;
  u64 root_ = PageStore::kNoPage;
  u64 count_ = 0;
  u32 height_ = 0;
  u64 leaf_cap_ = 0;
  u64 theta_ = 0;
};

}  // namespace hdindex

#endif  // HDINDEX_RDBTREE_HPP
