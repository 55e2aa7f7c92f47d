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

#ifndef HDINDEX_PAGESTORE_HPP
#define HDINDEX_PAGESTORE_HPP

#include <fcntl.h>
#include <unistd.h>

#include <string>
#include <vector>

#include "hdindex/common.hpp"

namespace hdindex {

inline void pread_full(int fd, void* buf, std::size_t len, u64 offset) {
  u8* p = static_cast<u8*>(buf);
  while (len > 0) {
    ssize_t got = ::pread(fd, p, len, static_cast<off_t>(offset));
    if (got < 0) throw_io("pread failed");
    if (got == 0) throw_io("pread hit end of file (truncated index?)");
    p += got;
    len -= static_cast<std::size_t>(got);
    offset += static_cast<u64>(got);
  }
}

inline void pwrite_full(int fd, const void* buf, std::size_t len, u64 offset) {
  const u8* p = static_cast<const u8*>(buf);
  while (len > 0) {
    ssize_t put = ::pwrite(fd, p, len, static_cast<off_t>(offset));
    if (put < 0) throw_io("pwrite failed");
    p += put;
    len -= static_cast<std::size_t>(put);
    offset += static_cast<u64>(put);
  }
}

/**
 * @brief Fixed-size page allocator over a region of an open file.
 *
 * Page 0 of the region is the store's own header (magic, page size, page
 * count, free-list head); everything else belongs to the trees. Freed pages
 * are chained through their first 8 bytes. The store borrows the descriptor —
 * the index file owns it — and addresses pages relative to `base_offset`, so
 * the page region can sit anywhere inside a larger file.
 */
class PageStore {
 public:
  static constexpr char kMagic[4] = {'H', 'P', 'G', '1'};
  static constexpr u64 kNoPage = 0;  // page 0 is the header, so 0 doubles as "null"

  PageStore() = default;

  static auto create(int fd, u64 base_offset, u32 page_size) -> PageStore {
    require(page_size >= 128, errc::config, "PageStore: page size below 128 bytes");
    PageStore ps;
    ps.fd_ = fd;
    ps.base_ = base_offset;
    ps.page_size_ = page_size;
    ps.page_count_ = 1;  // the header page
    ps.free_head_ = kNoPage;
    ps.write_store_header();
    return ps;
  }

  static auto open(int fd, u64 base_offset) -> PageStore {
    PageStore ps;
    ps.fd_ = fd;
    ps.base_ = base_offset;
    u8 hdr[32];
    pread_full(fd, hdr, sizeof hdr, base_offset);
    require(std::memcmp(hdr, kMagic, 4) == 0, errc::data, "PageStore: bad region magic");
    ps.page_size_ = load_le<u32>(hdr + 4);
    require(ps.page_size_ >= 128, errc::data, "PageStore: implausible page size in header");
    ps.page_count_ = load_le<u64>(hdr + 8);
    ps.free_head_ = load_le<u64>(hdr + 16);
    return ps;
  }

  auto page_size() const -> u32 { return page_size_; }
  auto page_count() const -> u64 { return page_count_; }
  auto base_offset() const -> u64 { return base_; }

  /// Total bytes the page region occupies on disk.
  auto region_bytes() const -> u64 { return page_count_ * page_size_; }

  void read(u64 page_id, std::vector<u8>& buf) const {
    check_page(page_id);
    buf.resize(page_size_);
    pread_full(fd_, buf.data(), page_size_, base_ + page_id * page_size_);
  }

  void write(u64 page_id, const std::vector<u8>& buf) {
    check_page(page_id);
    require(buf.size() == page_size_, errc::internal, "PageStore: page buffer size mismatch");
    pwrite_full(fd_, buf.data(), page_size_, base_ + page_id * page_size_);
  }

  /// Hands out a zeroed page, recycling freed ones first.
  auto alloc() -> u64 {
    u64 id;
    if (free_head_ != kNoPage) {
      id = free_head_;
      u8 next[8];
      pread_full(fd_, next, 8, base_ + id * page_size_);
      free_head_ = load_le<u64>(next);
    } else {
      id = page_count_++;
    }
    std::vector<u8> zero(page_size_, 0);
    pwrite_full(fd_, zero.data(), page_size_, base_ + id * page_size_);
    write_store_header();
    return id;
  }

  void free_page(u64 page_id) {
    check_page(page_id);
    u8 next[8];
    store_le<u64>(next, free_head_);
    pwrite_full(fd_, next, 8, base_ + page_id * page_size_);
    free_head_ = page_id;
    write_store_header();
  }

 private:
  void check_page(u64 page_id) const {
    require(page_id != kNoPage && page_id < page_count_, errc::internal,
            "PageStore: page id " + std::to_string(page_id) + " out of range");
  }

  void write_store_header() {
    u8 hdr[32] = {};
    std::memcpy(hdr, kMagic, 4);
    store_le<u32>(hdr + 4, page_size_);
    store_le<u64>(hdr + 8, page_count_);
    store_le<u64>(hdr + 16, free_head_);
    pwrite_full(fd_, hdr, sizeof hdr, base_);
  }

  int fd_ = -1;
  u64 base_ = 0;
  u32 page_size_ = 0;
  u64 page_count_ = 0;
  u64 free_head_ = kNoPage;
};

/// Standalone page store backed by its own file; what the unit tests use.
class PageFile {
 public:
  PageFile(const std::string& path, u32 page_size) : path_(path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_TRUNC, 0644);
    if (fd_ < 0) throw_io("cannot create page file: " + path);
    store_ = PageStore::create(fd_, 0, page_size);
  }

  ~PageFile() {
    if (fd_ >= 0) ::close(fd_);
  }

  PageFile(const PageFile&) = delete;
  auto operator=(const PageFile&) -> PageFile& = delete;

  auto store() -> PageStore& { return store_; }

 private:
  std::string path_;
  int fd_ = -1;
  PageStore store_;
};

}  // namespace hdindex

#endif  // HDINDEX_PAGESTORE_HPP
