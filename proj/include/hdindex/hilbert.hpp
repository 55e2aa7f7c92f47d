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

#ifndef HDINDEX_HILBERT_HPP
#define HDINDEX_HILBERT_HPP

#include <cmath>
#include <compare>
#include <span>
#include <string>
#include <vector>

#include "hdindex/common.hpp"

namespace hdindex {

/// Grid coordinates of one subvector: eta cell indices, each below 2^omega.
struct GridPoint {
  std::vector<u32> cells;

  auto eta() const -> std::size_t { return cells.size(); }
  auto operator==(const GridPoint&) const -> bool = default;
};

/**
 * @brief Position on the Hilbert curve, serialized big-endian.
 *
 * The key occupies ceil(eta * omega / 8) bytes with zero padding in the high
 * bits, so byte-lexicographic comparison of equal-width keys agrees with
 * numeric comparison. That property is what lets the trees order leaves by a
 * plain memcmp.
 */
struct HilbertKey {
  std::vector<u8> bytes;

  auto operator==(const HilbertKey&) const -> bool = default;
  auto operator<=>(const HilbertKey& o) const -> std::strong_ordering {
    const std::size_t common = std::min(bytes.size(), o.bytes.size());
    int c = common ? std::memcmp(bytes.data(), o.bytes.data(), common) : 0;
    if (c != 0) return c < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    return bytes.size() <=> o.bytes.size();
  }
};

inline auto hilbert_key_bytes(u32 eta, u32 omega) -> std::size_t {
  return (static_cast<std::size_t>(eta) * omega + 7) / 8;
}

inline void check_curve_params(u32 eta, u32 omega) {
  require(eta >= 1, errc::config, "hilbert: need at least one dimension");
  require(omega >= 1 && omega <= 32, errc::config,
          "hilbert: bits per dimension must lie in [1, 32]");
}

/**
 * @brief Maps a subvector onto the grid: cell_i = floor((x_i - lo) / (hi - lo) * 2^omega),
 * clamped into [0, 2^omega - 1] so domain-boundary values stay inside the grid.
 */
inline auto quantize(std::span<const double> coords, double lo, double hi, u32 omega)
    -> GridPoint {
  check_curve_params(static_cast<u32>(coords.size()), omega);
  require(lo < hi, errc::config, "quantize: empty value domain [lo, hi]");
  const double cells = std::ldexp(1.0, static_cast<int>(omega));  // 2^omega
  const double scale = cells / (hi - lo);
  const u64 max_cell = (omega == 32) ? 0xffffffffull : ((1ull << omega) - 1);
  GridPoint g;
  g.cells.reserve(coords.size());
  for (double x : coords) {
    require(std::isfinite(x), errc::data, "quantize: non-finite component");
    double c = std::floor((x - lo) * scale);
    if (c < 0.0) c = 0.0;
    u64 cell = static_cast<u64>(c);
    if (cell > max_cell) cell = max_cell;
    g.cells.push_back(static_cast<u32>(cell));
  }
  return g;
}

namespace detail {

// Butz's algorithm in Skilling's transpose formulation. X holds one omega-bit
// word per dimension; after the forward pass the key is the bit-interleave of
// the words, most-significant bit level first, dimension 0 first within a level.
inline void axes_to_transpose(std::vector<u32>& X, u32 b) {
  const int n = static_cast<int>(X.size());
  if (n < 2) return;  // the 1-dimensional curve is the identity
  u32 t;
  for (u64 Q = 1ull << (b - 1); Q > 1; Q >>= 1) {
    const u32 q = static_cast<u32>(Q);
    const u32 P = q - 1;
    for (int i = 0; i < n; ++i) {
      if (X[i] & q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
  for (int i = 1; i < n; ++i) X[i] ^= X[i - 1];
  t = 0;
  for (u64 Q = 1ull << (b - 1); Q > 1; Q >>= 1) {
    if (X[n - 1] & static_cast<u32>(Q)) t ^= static_cast<u32>(Q) - 1;
  }
  for (int i = 0; i < n; ++i) X[i] ^= t;
}

inline void transpose_to_axes(std::vector<u32>& X, u32 b) {
  const int n = static_cast<int>(X.size());
  if (n < 2) return;
  u32 t = X[n - 1] >> 1;
  for (int i = n - 1; i > 0; --i) X[i] ^= X[i - 1];
  X[0] ^= t;
  for (u64 Q = 2; Q < (1ull << b); Q <<= 1) {
    const u32 q = static_cast<u32>(Q);
    const u32 P = q - 1;
    for (int i = n - 1; i >= 0; --i) {
      if (X[i] & q) {
        X[0] ^= P;
      } else {
        t = (X[0] ^ X[i]) & P;
        X[0] ^= t;
        X[i] ^= t;
      }
    }
  }
}

}  // namespace detail

/// Grid cell -> curve position. Total bits = eta * omega; keys of one curve
/// always serialize to the same width.
inline auto hilbert_encode(const GridPoint& g, u32 omega) -> HilbertKey {
  const u32 eta = static_cast<u32>(g.eta());
  check_curve_params(eta, omega);
  const u64 max_cell = (omega == 32) ? 0xffffffffull : ((1ull << omega) - 1);
  for (u32 c : g.cells) {
    require(c <= max_cell, errc::data,
            "hilbert_encode: cell index " + std::to_string(c) + " needs more than " +
                std::to_string(omega) + " bits");
  }

  std::vector<u32> X = g.cells;
  detail::axes_to_transpose(X, omega);

  const std::size_t total_bits = static_cast<std::size_t>(eta) * omega;
  HilbertKey key;
  key.bytes.assign(hilbert_key_bytes(eta, omega), 0);
  const std::size_t pad = key.bytes.size() * 8 - total_bits;
  // Interleave: bit t (counting from the key's most significant end) comes from
  // word t % eta, bit position omega - 1 - t / eta.
  for (std::size_t t = 0; t < total_bits; ++t) {
    const u32 word = X[t % eta];
    const u32 bit = (word >> (omega - 1 - t / eta)) & 1u;
    if (bit) {
      const std::size_t pos = pad + t;
      key.bytes[pos / 8] |= static_cast<u8>(0x80u >> (pos % 8));
    }
  }
  return key;
}

/// Curve position -> grid cell. Rejects keys of the wrong width or with
/// padding bits set, so every accepted key round-trips.
inline auto hilbert_decode(const HilbertKey& key, u32 eta, u32 omega) -> GridPoint {
  check_curve_params(eta, omega);
  require(key.bytes.size() == hilbert_key_bytes(eta, omega), errc::data,
          "hilbert_decode: key width mismatch");
  const std::size_t total_bits = static_cast<std::size_t>(eta) * omega;
  const std::size_t pad = key.bytes.size() * 8 - total_bits;
  for (std::size_t p = 0; p < pad; ++p) {
    require((key.bytes[p / 8] & (0x80u >> (p % 8))) == 0, errc::data,
            "hilbert_decode: padding bits set in key");
  }

  std::vector<u32> X(eta, 0);
  for (std::size_t t = 0; t < total_bits; ++t) {
    const std::size_t pos = pad + t;
    if (key.bytes[pos / 8] & (0x80u >> (pos % 8))) {
      X[t % eta] |= 1u << (omega - 1 - t / eta);
    }
  }
  detail::transpose_to_axes(X, omega);

  GridPoint g;
  g.cells = std::move(X);
  return g;
}

/// |a - b| over equal-width big-endian keys, still big-endian.
inline auto key_abs_diff(const HilbertKey& a, const HilbertKey& b) -> std::vector<u8> {
  require(a.bytes.size() == b.bytes.size(), errc::internal,
          "key_abs_diff: mixed key widths");
  const std::vector<u8>* hi = &a.bytes;
  const std::vector<u8>* lo = &b.bytes;
  if (a < b) std::swap(hi, lo);
  std::vector<u8> out(a.bytes.size(), 0);
  int borrow = 0;
  for (std::size_t i = out.size(); i-- > 0;) {
    int v = static_cast<int>((*hi)[i]) - static_cast<int>((*lo)[i]) - borrow;
    borrow = v < 0;
    out[i] = static_cast<u8>(v + (borrow ? 256 : 0));
  }
  return out;
}

}  // namespace hdindex

#endif  // HDINDEX_HILBERT_HPP
