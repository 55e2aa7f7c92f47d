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

#ifndef HDINDEX_COMMON_HPP
#define HDINDEX_COMMON_HPP

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace hdindex {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i32 = std::int32_t;
using i64 = std::int64_t;

/// Error categories, mapped to CLI exit codes (config/data/io -> 2, internal -> 3).
enum class errc {
  config,    ///< invalid parameter combination
  data,      ///< malformed or inconsistent input data
  io,        ///< filesystem / serialization failure
  internal,  ///< broken invariant; indicates a bug
};

class error : public std::runtime_error {
 public:
  error(errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}

  auto kind() const -> errc { return kind_; }

 private:
  errc kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw error(errc::config, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw error(errc::data, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw error(errc::io, msg); }
[[noreturn]] inline void throw_internal(const std::string& msg) { throw error(errc::internal, msg); }

inline void require(bool cond, errc kind, const std::string& msg) {
  if (!cond) throw error(kind, msg);
}

/*----------------------------------------------------------------------------*
 * Little-endian buffer access
 *----------------------------------------------------------------------------*/

template <class T>
inline void store_le(u8* p, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    p[i] = static_cast<u8>(static_cast<u64>(v) >> (8 * i));
  }
}

template <class T>
inline auto load_le(const u8* p) -> T {
  u64 v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<u64>(p[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

inline void store_f32_le(u8* p, float v) {
  u32 bits;
  std::memcpy(&bits, &v, 4);
  store_le<u32>(p, bits);
}

inline auto load_f32_le(const u8* p) -> float {
  u32 bits = load_le<u32>(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

inline void store_f64_le(u8* p, double v) {
  u64 bits;
  std::memcpy(&bits, &v, 8);
  store_le<u64>(p, bits);
}

inline auto load_f64_le(const u8* p) -> double {
  u64 bits = load_le<u64>(p);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

/// Byte-stream writer used for the non-page sections of the index file.
class byte_writer {
 public:
  template <class T>
  void put(T v) {
    std::size_t at = buf_.size();
    buf_.resize(at + sizeof(T));
    store_le<T>(buf_.data() + at, v);
  }
  void put_f64(double v) {
    std::size_t at = buf_.size();
    buf_.resize(at + 8);
    store_f64_le(buf_.data() + at, v);
  }
  void put_bytes(const u8* p, std::size_t len) { buf_.insert(buf_.end(), p, p + len); }
  void put_string(const std::string& s) {
    put<u32>(static_cast<u32>(s.size()));
    put_bytes(reinterpret_cast<const u8*>(s.data()), s.size());
  }

  auto data() const -> const std::vector<u8>& { return buf_; }
  auto size() const -> std::size_t { return buf_.size(); }

 private:
  std::vector<u8> buf_;
};

/// Bounds-checked reader over a byte buffer.
class byte_reader {
 public:
  byte_reader(const u8* p, std::size_t len) : p_(p), len_(len) {}

  template <class T>
  auto get() -> T {
    need(sizeof(T));
    T v = load_le<T>(p_ + at_);
    at_ += sizeof(T);
    return v;
  }
  auto get_f64() -> double {
    need(8);
    double v = load_f64_le(p_ + at_);
    at_ += 8;
    return v;
  }
  void get_bytes(u8* out, std::size_t len) {
    need(len);
    std::memcpy(out, p_ + at_, len);
    at_ += len;
  }
  auto get_string() -> std::string {
    u32 len = get<u32>();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + at_), len);
    at_ += len;
    return s;
  }

  auto offset() const -> std::size_t { return at_; }
  auto remaining() const -> std::size_t { return len_ - at_; }

 private:
  void need(std::size_t len) {
    if (at_ + len > len_) throw_io("truncated section while reading index file");
  }

  const u8* p_;
  std::size_t len_;
  std::size_t at_ = 0;
};

/*----------------------------------------------------------------------------*
 * Checksums
 *----------------------------------------------------------------------------*/

inline constexpr u64 kFnvOffset = 0xcbf29ce484222325ull;
inline constexpr u64 kFnvPrime = 0x00000100000001b3ull;

inline auto fnv1a64(const void* data, std::size_t len, u64 h = kFnvOffset) -> u64 {
  const u8* p = static_cast<const u8*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

auto fnv1a64_file(const std::string& path) -> u64;  // defined in io section below

}  // namespace hdindex

#include <cstdio>

namespace hdindex {

inline auto fnv1a64_file(const std::string& path) -> u64 {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw_io("cannot open file for checksum: " + path);
  u64 h = kFnvOffset;
  std::vector<u8> buf(1 << 16);
  std::size_t got;
  while ((got = std::fread(buf.data(), 1, buf.size(), f)) > 0) {
    h = fnv1a64(buf.data(), got, h);
  }
  std::fclose(f);
  return h;
}

}  // namespace hdindex

#endif  // HDINDEX_COMMON_HPP
