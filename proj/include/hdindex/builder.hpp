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

#ifndef HDINDEX_BUILDER_HPP
#define HDINDEX_BUILDER_HPP

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "hdindex/ingest.hpp"
#include "hdindex/rdbtree.hpp"
#include "hdindex/refsel.hpp"

namespace hdindex {

/// How many trees the index splits the dimensions across.
struct Partitioning {
  u32 nu = 0;
  u32 tau = 0;
  u32 eta = 0;  // dims per tree

  /// Dimension range of tree t: [first(t), first(t) + eta).
  auto first(u32 t) const -> u32 { return t * eta; }
};

/// Contiguous equal split of nu dimensions into tau groups. tau must divide
/// nu; the error message suggests the nearest tau that does.
inline auto partition_dimensions(u32 nu, u32 tau) -> Partitioning {
  require(nu >= 1, errc::config, "partition_dimensions: dimensionality must be positive");
  require(tau >= 1 && tau <= nu, errc::config,
          "partition_dimensions: tau must lie in [1, " + std::to_string(nu) + "]");
  if (nu % tau != 0) {
    u32 best = 1;
    for (u32 c = 1; c <= nu; ++c) {
      if (nu % c != 0) continue;
      u64 dc = c > tau ? c - tau : tau - c;
      u64 db = best > tau ? best - tau : tau - best;
      if (dc < db || (dc == db && c > best)) best = c;
    }
    throw_config("partition_dimensions: tau=" + std::to_string(tau) + " does not divide nu=" +
                 std::to_string(nu) + "; nearest valid tau is " + std::to_string(best));
  }
  return Partitioning{nu, tau, nu / tau};
}

/// Build-time knobs. Zeros mean "pick the default for this dataset".
struct IndexConfig {
  u32 tau = 0;        // default: 16 for 500+ dims, else 8, snapped to a divisor
  u32 omega = 0;      // default: 8 bits for byte data, else 32
  u32 m = 10;         // requested reference count
  u32 page_size = 4096;
  double f = 0.3;     // sparse-selection radius factor
  SelectionMethod method = SelectionMethod::sss;
  u64 seed = 42;
  double scale = 0.0;     // nonzero: descriptors on disk are raw values, the
                          // index holds round(value * scale)
  u32 pair_budget = 1000; // sss-dyn evaluation pairs
  std::vector<u64> fixed_refs;  // non-empty: use exactly these ids, skip selection
};

/// The configuration a built index actually used, as stored in its file.
struct IndexMeta {
  u32 nu = 0;
  u32 tau = 0;
  u32 eta = 0;
  u32 omega = 0;
  u32 m_requested = 0;
  u32 m_eff = 0;  // min(m, n): tiny collections get fewer references
  u32 page_size = 0;
  double f = 0.0;
  SelectionMethod method = SelectionMethod::sss;
  ElementKind kind = ElementKind::f32;
  u64 seed = 0;
  double lo = 0.0;
  double hi = 1.0;
  double scale = 0.0;

  auto key_bytes() const -> u32 {
    return static_cast<u32>(hilbert_key_bytes(eta, omega));
  }
};

namespace detail {

inline auto resolve_tau(u32 nu, u32 requested) -> u32 {
  if (requested != 0) {
    partition_dimensions(nu, requested);  // throws with a suggestion if invalid
    return requested;
  }
  const u32 target = nu >= 500 ? 16 : 8;
  u32 best = 1;
  for (u32 c = 1; c <= nu; ++c) {
    if (nu % c != 0) continue;
    u64 dc = c > target ? c - target : target - c;
    u64 db = best > target ? best - target : target - best;
    if (dc < db || (dc == db && c > best)) best = c;
  }
  return best;
}

inline auto resolve_omega(ElementKind kind, u32 requested) -> u32 {
  u32 omega = requested != 0 ? requested : (kind == ElementKind::u8x ? 8u : 32u);
  require(omega == 8 || omega == 16 || omega == 32, errc::config,
          "IndexConfig: omega must be 8, 16, or 32 bits");
  return omega;
}

}  // namespace detail

/*----------------------------------------------------------------------------*
 * Index file layout (all integers little-endian, Hilbert keys raw big-endian):
 *
 *   [0, 63]    magic 'HDIX' | version | offsets of the sections below |
 *              dataset checksum
 *   meta+refs  resolved configuration, then the reference objects (ids,
 *              coordinates, pairwise distances, dmax)
 *   roots      tau page ids, one tree header page each
 *   pages      PageStore region, aligned to the page size
 *   footer     object count | live count | tombstone bitmap | descriptor
 *              offset table | inline descriptors | dataset path
 *
 * The offset table maps each object id to its coordinates: either an offset
 * into the dataset file (records present at build time) or, with the top bit
 * set, an offset into the footer's inline blob (records inserted later).
 *----------------------------------------------------------------------------*/

inline constexpr char kIndexMagic[4] = {'H', 'D', 'I', 'X'};
inline constexpr u32 kIndexVersion = 1;
inline constexpr u64 kInlineBit = 1ull << 63;
inline constexpr u64 kAbsentOffset = ~0ull;  // id was never assigned

/**
 * @brief A built index: tau Hilbert-keyed trees over one page file, the
 * reference set they filter with, and the descriptor plumbing to re-rank
 * candidates against the original vectors.
 */
class HDIndex {
 public:
  HDIndex(const HDIndex&) = delete;
  auto operator=(const HDIndex&) -> HDIndex& = delete;

  HDIndex(HDIndex&& o) noexcept { steal(std::move(o)); }
  auto operator=(HDIndex&& o) noexcept -> HDIndex& {
    if (this != &o) {
      dispose();
      steal(std::move(o));
    }
    return *this;
  }

  ~HDIndex() { dispose(); }

  /**
   * @brief Builds an index over `data`, whose on-disk descriptors live in
   * `dataset_path` (a vecs file of `kind`). With an empty `index_path` the
   * index goes to a self-deleting temporary; persist() snapshots it somewhere
   * permanent.
   */
  static auto build(const Dataset& data, ElementKind kind, const IndexConfig& cfg,
                    const std::string& dataset_path, const std::string& index_path = "")
      -> HDIndex {
    HDIndex idx;
    idx.meta_.nu = static_cast<u32>(data.dim());
    idx.meta_.tau = detail::resolve_tau(idx.meta_.nu, cfg.tau);
    idx.meta_.eta = idx.meta_.nu / idx.meta_.tau;
    idx.meta_.omega = detail::resolve_omega(kind, cfg.omega);
    idx.meta_.m_requested = cfg.m;
    idx.meta_.m_eff = static_cast<u32>(std::min<u64>(cfg.m, data.size()));
    idx.meta_.page_size = cfg.page_size;
    idx.meta_.f = cfg.f;
    idx.meta_.method = cfg.method;
    idx.meta_.kind = kind;
    idx.meta_.seed = cfg.seed;
    idx.meta_.lo = data.lo();
    idx.meta_.hi = data.hi();
    idx.meta_.scale = cfg.scale;
    if (!cfg.fixed_refs.empty()) {
      idx.meta_.method = SelectionMethod::fixed;
      idx.meta_.m_requested = static_cast<u32>(cfg.fixed_refs.size());
      idx.meta_.m_eff = idx.meta_.m_requested;
    } else {
      require(cfg.m >= 2, errc::config, "IndexConfig: need at least two references");
    }
    require(data.lo() < data.hi(), errc::config, "build: empty value domain");

    idx.parts_ = partition_dimensions(idx.meta_.nu, idx.meta_.tau);
    idx.dataset_path_ = dataset_path;
    idx.dataset_checksum_ = fnv1a64_file(dataset_path);

    if (!cfg.fixed_refs.empty()) {
      idx.refs_ = select_fixed(data, cfg.fixed_refs);
    } else if (idx.meta_.m_eff >= 1) {
      idx.refs_ = select_references(data, cfg.method, idx.meta_.m_eff, cfg.f, cfg.seed,
                                    cfg.pair_budget);
    }

    idx.open_file(index_path);
    idx.layout_sections();
    idx.store_ = std::make_unique<PageStore>(
        PageStore::create(idx.fd_, idx.pages_off_, idx.meta_.page_size));
    for (u32 t = 0; t < idx.meta_.tau; ++t) {
      idx.trees_.push_back(RdbTree::create(*idx.store_, idx.meta_.key_bytes(), idx.meta_.m_eff));
    }

    idx.populate_trees(data);
    idx.init_offsets(data);
    idx.map_dataset();
    idx.verify_descriptors(data);
    idx.dirty_ = true;
    idx.flush();
    return idx;
  }

  /// Opens an existing index file. The dataset file is located through the
  /// path recorded at build time unless `dataset_override` points elsewhere;
  /// either way its checksum must match the one the index was built against.
  static auto load(const std::string& index_path, const std::string& dataset_override = "")
      -> HDIndex {
    HDIndex idx;
    idx.path_ = index_path;
    idx.fd_ = ::open(index_path.c_str(), O_RDWR);
    if (idx.fd_ < 0) throw_io("cannot open index file: " + index_path);

    u8 hdr[64];
    pread_full(idx.fd_, hdr, sizeof hdr, 0);
    require(std::memcmp(hdr, kIndexMagic, 4) == 0, errc::data,
            index_path + " is not an index file");
    const u32 version = load_le<u32>(hdr + 4);
    require(version == kIndexVersion, errc::data,
            index_path + ": unsupported index version " + std::to_string(version));
    idx.refs_off_ = load_le<u64>(hdr + 8);
    idx.roots_off_ = load_le<u64>(hdr + 16);
    idx.pages_off_ = load_le<u64>(hdr + 24);
    idx.footer_off_ = load_le<u64>(hdr + 32);
    idx.dataset_checksum_ = load_le<u64>(hdr + 40);

    idx.read_meta_and_refs();
    idx.read_roots();
    idx.store_ = std::make_unique<PageStore>(PageStore::open(idx.fd_, idx.pages_off_));
    for (u64 root : idx.roots_) {
      idx.trees_.push_back(RdbTree::open(*idx.store_, root));
    }
    idx.read_footer();
    idx.parts_ = partition_dimensions(idx.meta_.nu, idx.meta_.tau);

    if (!dataset_override.empty()) idx.dataset_path_ = dataset_override;
    const u64 sum = fnv1a64_file(idx.dataset_path_);
    require(sum == idx.dataset_checksum_, errc::data,
            "load: dataset file " + idx.dataset_path_ +
                " does not match the one this index was built from");
    idx.map_dataset();
    return idx;
  }

  /// Flushes state and snapshots the index file at `path`. The live instance
  /// keeps using its original backing file.
  void persist(const std::string& path) {
    flush();
    if (path == path_) return;
    std::error_code ec;
    std::filesystem::copy_file(path_, path, std::filesystem::copy_options::overwrite_existing,
                               ec);
    if (ec) throw_io("persist: cannot copy index to " + path + ": " + ec.message());
  }

  /// Rewrites the footer (tombstones, offsets, inline descriptors) and header.
  void flush() {
    byte_writer w;
    w.put<u64>(n_total_);
    w.put<u64>(live_count_);
    const u64 ts_bytes = (n_total_ + 7) / 8;
    std::vector<u8> ts(ts_bytes, 0);
    for (u64 i = 0; i < n_total_; ++i) {
      if (tombstones_[i]) ts[i / 8] |= static_cast<u8>(1u << (i % 8));
    }
    w.put_bytes(ts.data(), ts.size());
    for (u64 off : offsets_) w.put<u64>(off);
    w.put<u64>(extra_.size() / std::max<u64>(meta_.nu, 1));
    for (double v : extra_) w.put_f64(v);
    w.put_string(dataset_path_);

    footer_off_ = pages_off_ + store_->region_bytes();
    pwrite_full(fd_, w.data().data(), w.size(), footer_off_);
    if (::ftruncate(fd_, static_cast<off_t>(footer_off_ + w.size())) != 0) {
      throw_io("flush: ftruncate failed");
    }
    write_file_header();
    dirty_ = false;
  }

  /*------------------------------ mutations --------------------------------*/

  /**
   * @brief Adds one vector. Its id must be fresh; the next unused id is
   * object_count(). Coordinates are stored inline in the index file, so the
   * dataset file stays untouched.
   */
  void insert_object(const VectorRecord& rec) {
    require(rec.coords.size() == meta_.nu, errc::data,
            "insert_object: record has " + std::to_string(rec.coords.size()) +
                " components, index expects " + std::to_string(meta_.nu));
    require(rec.id >= n_total_, errc::data,
            "insert_object: id " + std::to_string(rec.id) + " already assigned");
    for (double v : rec.coords) {
      require(std::isfinite(v), errc::data, "insert_object: non-finite component");
    }

    std::vector<float> rd(meta_.m_eff);
    for (u32 r = 0; r < meta_.m_eff; ++r) {
      rd[r] = static_cast<float>(euclidean(rec.coords, refs_.coords[r]));
    }
    for (u32 t = 0; t < meta_.tau; ++t) {
      LeafEntry e;
      e.key = tree_key(rec.coords, t);
      e.id = rec.id;
      e.refdists = rd;
      trees_[t].insert(e);
    }

    // Ids between the old frontier and rec.id were skipped by the caller;
    // record them as never-assigned so lookups reject them.
    while (n_total_ < rec.id) {
      offsets_.push_back(kAbsentOffset);
      tombstones_.push_back(1);
      ++n_total_;
    }
    offsets_.push_back(kInlineBit | (extra_.size() * 8));
    extra_.insert(extra_.end(), rec.coords.begin(), rec.coords.end());
    tombstones_.push_back(0);
    ++n_total_;
    ++live_count_;
    dirty_ = true;
  }

  /// Tombstones one object. The entries stay in the trees; queries drop them
  /// before re-ranking.
  void delete_object(u64 id) {
    require(id < n_total_ && offsets_[id] != kAbsentOffset, errc::data,
            "delete_object: unknown id " + std::to_string(id));
    require(!tombstones_[id], errc::data,
            "delete_object: id " + std::to_string(id) + " already deleted");
    tombstones_[id] = 1;
    --live_count_;
    dirty_ = true;
  }

  /*------------------------------ accessors --------------------------------*/

  auto meta() const -> const IndexMeta& { return meta_; }
  auto references() const -> const ReferenceSet& { return refs_; }
  auto partitioning() const -> const Partitioning& { return parts_; }
  auto trees() -> std::vector<RdbTree>& { return trees_; }
  auto object_count() const -> u64 { return n_total_; }
  auto live_count() const -> u64 { return live_count_; }
  auto path() const -> const std::string& { return path_; }
  auto dataset_checksum() const -> u64 { return dataset_checksum_; }

  auto is_live(u64 id) const -> bool {
    return id < n_total_ && offsets_[id] != kAbsentOffset && !tombstones_[id];
  }

  /// Hilbert key of the subvector of `coords` that tree t indexes.
  auto tree_key(std::span<const double> coords, u32 t) const -> HilbertKey {
    auto slice = coords.subspan(parts_.first(t), parts_.eta);
    return hilbert_encode(quantize(slice, meta_.lo, meta_.hi, meta_.omega), meta_.omega);
  }

  /**
   * @brief Reads one descriptor back, from the memory-mapped dataset file or
   * the inline blob, applying the build-time scaling. This is the random
   * access the final re-ranking stage does per candidate.
   */
  auto fetch_coords(u64 id) const -> std::vector<double> {
    require(id < n_total_ && offsets_[id] != kAbsentOffset, errc::internal,
            "fetch_coords: unknown id " + std::to_string(id));
    const u64 off = offsets_[id];
    std::vector<double> out(meta_.nu);
    if (off & kInlineBit) {
      const u64 at = (off & ~kInlineBit) / 8;
      require(at + meta_.nu <= extra_.size(), errc::internal,
              "fetch_coords: inline offset out of range");
      std::copy(extra_.begin() + at, extra_.begin() + at + meta_.nu, out.begin());
      return out;  // inline descriptors are stored post-scaling
    }
    const std::size_t esz = element_size(meta_.kind);
    require(map_ != nullptr && off + meta_.nu * esz <= map_len_, errc::internal,
            "fetch_coords: descriptor offset beyond dataset file");
    const u8* p = static_cast<const u8*>(map_) + off;
    for (u32 i = 0; i < meta_.nu; ++i) {
      switch (meta_.kind) {
        case ElementKind::f32: out[i] = load_f32_le(p + i * 4); break;
        case ElementKind::u8x: out[i] = p[i]; break;
        case ElementKind::i32: out[i] = load_le<i32>(p + i * 4); break;
      }
      if (meta_.scale != 0.0) out[i] = std::round(out[i] * meta_.scale);
    }
    return out;
  }

  /// Size of the index file in bytes (header through footer).
  auto file_bytes() const -> u64 {
    struct stat st {};
    require(::fstat(fd_, &st) == 0, errc::io, "fstat failed on index file");
    return static_cast<u64>(st.st_size);
  }

 private:
  HDIndex() = default;

  void dispose() {
    if (fd_ >= 0) {
      try {
        if (dirty_) flush();
      } catch (...) {
        // a failed background flush must not terminate; persist() reports errors
      }
      unmap_dataset();
      ::close(fd_);
      if (temp_file_) ::unlink(path_.c_str());
      fd_ = -1;
    }
  }

  void steal(HDIndex&& o) noexcept {
    meta_ = o.meta_;
    refs_ = std::move(o.refs_);
    parts_ = o.parts_;
    store_ = std::move(o.store_);   // trees keep pointing at the same PageStore
    trees_ = std::move(o.trees_);
    roots_ = std::move(o.roots_);
    fd_ = o.fd_;
    path_ = std::move(o.path_);
    temp_file_ = o.temp_file_;
    dirty_ = o.dirty_;
    refs_off_ = o.refs_off_;
    roots_off_ = o.roots_off_;
    pages_off_ = o.pages_off_;
    footer_off_ = o.footer_off_;
    n_total_ = o.n_total_;
    live_count_ = o.live_count_;
    tombstones_ = std::move(o.tombstones_);
    offsets_ = std::move(o.offsets_);
    extra_ = std::move(o.extra_);
    dataset_path_ = std::move(o.dataset_path_);
    dataset_checksum_ = o.dataset_checksum_;
    map_ = o.map_;
    map_len_ = o.map_len_;
    o.fd_ = -1;
    o.temp_file_ = false;
    o.dirty_ = false;
    o.map_ = nullptr;
    o.map_len_ = 0;
  }

  void open_file(const std::string& index_path) {
    if (index_path.empty()) {
      auto tmpl = (std::filesystem::temp_directory_path() / "hdindex-XXXXXX").string();
      std::vector<char> buf(tmpl.begin(), tmpl.end());
      buf.push_back('\0');
      fd_ = ::mkstemp(buf.data());
      if (fd_ < 0) throw_io("cannot create temporary index file");
      path_.assign(buf.data());
      temp_file_ = true;
    } else {
      fd_ = ::open(index_path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
      if (fd_ < 0) throw_io("cannot create index file: " + index_path);
      path_ = index_path;
      temp_file_ = false;
    }
  }

  auto meta_refs_blob() const -> std::vector<u8> {
    byte_writer w;
    w.put<u32>(meta_.nu);
    w.put<u32>(meta_.tau);
    w.put<u32>(meta_.omega);
    w.put<u32>(meta_.m_requested);
    w.put<u32>(meta_.m_eff);
    w.put<u32>(meta_.page_size);
    w.put_f64(meta_.f);
    w.put<u8>(static_cast<u8>(meta_.method));
    w.put<u8>(static_cast<u8>(meta_.kind));
    w.put<u16>(0);  // padding
    w.put<u64>(meta_.seed);
    w.put_f64(meta_.lo);
    w.put_f64(meta_.hi);
    w.put_f64(meta_.scale);

    w.put<u32>(static_cast<u32>(refs_.size()));
    for (std::size_t r = 0; r < refs_.size(); ++r) {
      w.put<u64>(refs_.ids[r]);
      for (double v : refs_.coords[r]) w.put_f64(v);
    }
    for (double v : refs_.pairwise) w.put_f64(v);
    w.put_f64(refs_.dmax);
    w.put_f64(refs_.f_used);
    w.put<u8>(static_cast<u8>(refs_.method));
    return w.data();
  }

  void layout_sections() {
    const std::vector<u8> blob = meta_refs_blob();
    refs_off_ = 64;
    roots_off_ = refs_off_ + blob.size();
    const u64 roots_len = 8ull * meta_.tau;
    const u64 B = meta_.page_size;
    pages_off_ = ((roots_off_ + roots_len + B - 1) / B) * B;
  }

  void write_file_header() {
    u8 hdr[64] = {};
    std::memcpy(hdr, kIndexMagic, 4);
    store_le<u32>(hdr + 4, kIndexVersion);
    store_le<u64>(hdr + 8, refs_off_);
    store_le<u64>(hdr + 16, roots_off_);
    store_le<u64>(hdr + 24, pages_off_);
    store_le<u64>(hdr + 32, footer_off_);
    store_le<u64>(hdr + 40, dataset_checksum_);
    pwrite_full(fd_, hdr, sizeof hdr, 0);

    const std::vector<u8> blob = meta_refs_blob();
    pwrite_full(fd_, blob.data(), blob.size(), refs_off_);
    byte_writer roots;
    for (const auto& t : trees_) roots.put<u64>(t.header_page());
    pwrite_full(fd_, roots.data().data(), roots.size(), roots_off_);
  }

  void read_meta_and_refs() {
    const u64 len = roots_off_ - refs_off_;
    std::vector<u8> blob(len);
    pread_full(fd_, blob.data(), len, refs_off_);
    byte_reader r(blob.data(), blob.size());
    meta_.nu = r.get<u32>();
    meta_.tau = r.get<u32>();
    meta_.omega = r.get<u32>();
    meta_.m_requested = r.get<u32>();
    meta_.m_eff = r.get<u32>();
    meta_.page_size = r.get<u32>();
    meta_.f = r.get_f64();
    meta_.method = static_cast<SelectionMethod>(r.get<u8>());
    meta_.kind = static_cast<ElementKind>(r.get<u8>());
    r.get<u16>();
    meta_.seed = r.get<u64>();
    meta_.eta = meta_.tau ? meta_.nu / meta_.tau : 0;
    meta_.lo = r.get_f64();
    meta_.hi = r.get_f64();
    meta_.scale = r.get_f64();

    const u32 m = r.get<u32>();
    refs_ = ReferenceSet{};
    refs_.ids.resize(m);
    refs_.coords.assign(m, std::vector<double>(meta_.nu));
    for (u32 i = 0; i < m; ++i) {
      refs_.ids[i] = r.get<u64>();
      for (u32 j = 0; j < meta_.nu; ++j) refs_.coords[i][j] = r.get_f64();
    }
    refs_.pairwise.resize(static_cast<std::size_t>(m) * m);
    for (auto& v : refs_.pairwise) v = r.get_f64();
    refs_.dmax = r.get_f64();
    refs_.f_used = r.get_f64();
    refs_.method = static_cast<SelectionMethod>(r.get<u8>());
  }

  void read_roots() {
    std::vector<u8> blob(8ull * meta_.tau);
    pread_full(fd_, blob.data(), blob.size(), roots_off_);
    roots_.resize(meta_.tau);
    for (u32 t = 0; t < meta_.tau; ++t) roots_[t] = load_le<u64>(blob.data() + 8ull * t);
  }

  void read_footer() {
    struct stat st {};
    require(::fstat(fd_, &st) == 0, errc::io, "fstat failed on index file");
    const u64 fsize = static_cast<u64>(st.st_size);
    require(footer_off_ <= fsize, errc::data, "index file truncated before footer");
    std::vector<u8> blob(fsize - footer_off_);
    pread_full(fd_, blob.data(), blob.size(), footer_off_);
    byte_reader r(blob.data(), blob.size());
    n_total_ = r.get<u64>();
    live_count_ = r.get<u64>();
    std::vector<u8> ts((n_total_ + 7) / 8);
    r.get_bytes(ts.data(), ts.size());
    tombstones_.assign(n_total_, 0);
    for (u64 i = 0; i < n_total_; ++i) {
      tombstones_[i] = (ts[i / 8] >> (i % 8)) & 1;
    }
    offsets_.resize(n_total_);
    for (u64 i = 0; i < n_total_; ++i) offsets_[i] = r.get<u64>();
    const u64 extra_records = r.get<u64>();
    extra_.resize(extra_records * meta_.nu);
    for (auto& v : extra_) v = r.get_f64();
    dataset_path_ = r.get_string();

    u64 live = 0;
    for (u64 i = 0; i < n_total_; ++i) {
      if (offsets_[i] != kAbsentOffset && !tombstones_[i]) ++live;
    }
    require(live == live_count_, errc::data, "index footer: live count disagrees with bitmap");
  }

  void populate_trees(const Dataset& data) {
    const u64 n = data.size();
    std::vector<std::vector<float>> rdist(n, std::vector<float>(meta_.m_eff));
    for (u64 i = 0; i < n; ++i) {
      for (u32 r = 0; r < meta_.m_eff; ++r) {
        rdist[i][r] = static_cast<float>(euclidean(data[i], refs_.coords[r]));
      }
    }
    for (u32 t = 0; t < meta_.tau; ++t) {
      std::vector<LeafEntry> entries(n);
      for (u64 i = 0; i < n; ++i) {
        entries[i].key = tree_key(data[i], t);
        entries[i].id = i;
        entries[i].refdists = rdist[i];
      }
      std::sort(entries.begin(), entries.end(), [](const LeafEntry& a, const LeafEntry& b) {
        if (a.key != b.key) return a.key < b.key;
        return a.id < b.id;
      });
      trees_[t].bulk_build(entries);
    }
  }

  void init_offsets(const Dataset& data) {
    const u64 record_bytes = 4 + data.dim() * element_size(meta_.kind);
    offsets_.resize(data.size());
    for (u64 i = 0; i < data.size(); ++i) {
      offsets_[i] = data.source_row(i) * record_bytes + 4;  // skip the count prefix
    }
    tombstones_.assign(data.size(), 0);
    n_total_ = data.size();
    live_count_ = data.size();
  }

  void map_dataset() {
    struct stat st {};
    if (::stat(dataset_path_.c_str(), &st) != 0) {
      throw_io("dataset file not found: " + dataset_path_);
    }
    map_len_ = static_cast<std::size_t>(st.st_size);
    if (map_len_ == 0) return;  // empty dataset: nothing to map
    int dfd = ::open(dataset_path_.c_str(), O_RDONLY);
    if (dfd < 0) throw_io("cannot open dataset file: " + dataset_path_);
    map_ = ::mmap(nullptr, map_len_, PROT_READ, MAP_SHARED, dfd, 0);
    ::close(dfd);
    if (map_ == MAP_FAILED) {
      map_ = nullptr;
      throw_io("cannot map dataset file: " + dataset_path_);
    }
  }

  void unmap_dataset() {
    if (map_ != nullptr) {
      ::munmap(map_, map_len_);
      map_ = nullptr;
    }
  }

  /// Spot-checks that descriptors fetched through the offset table reproduce
  /// the vectors that were indexed — catches a wrong path, kind, or scale
  /// right at build time instead of as silently broken distances later.
  void verify_descriptors(const Dataset& data) const {
    const u64 n = data.size();
    if (n == 0) return;
    const u64 step = std::max<u64>(1, n / 16);
    for (u64 i = 0; i < n; i += step) {
      auto fetched = fetch_coords(i);
      auto expect = data[i];
      for (u32 j = 0; j < meta_.nu; ++j) {
        require(fetched[j] == expect[j], errc::data,
                "build: descriptor " + std::to_string(i) +
                    " read back differently from the dataset file (wrong kind or scale?)");
      }
    }
  }

  IndexMeta meta_;
  ReferenceSet refs_;
  Partitioning parts_;
  std::unique_ptr<PageStore> store_;
  std::vector<RdbTree> trees_;
  std::vector<u64> roots_;

  int fd_ = -1;
  std::string path_;
  bool temp_file_ = false;
  bool dirty_ = false;

  u64 refs_off_ = 0;
  u64 roots_off_ = 0;
  u64 pages_off_ = 0;
  u64 footer_off_ = 0;

  u64 n_total_ = 0;
  u64 live_count_ = 0;
  std::vector<u8> tombstones_;
  std::vector<u64> offsets_;
  std::vector<double> extra_;

  std::string dataset_path_;
  u64 dataset_checksum_ = 0;

  void* map_ = nullptr;
  std::size_t map_len_ = 0;
};

}  // namespace hdindex

#endif  // HDINDEX_BUILDER_HPP
