// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bxf/tensor.hpp"

namespace bxf {

inline constexpr std::size_t kWordBits = 64;

inline constexpr std::size_t words_for(std::size_t bits) noexcept {
  return (bits + kWordBits - 1) / kWordBits;
}

/// A +/-1 vector packed LSB-first into 64-bit words: bit 1 encodes +1 and
/// bit 0 encodes -1. Bits past `valid_bits` are always zero.
struct PackedBits {
  std::vector<std::uint64_t> words;
  std::size_t valid_bits = 0;

  static PackedBits pack(std::span<const double> values);
  bool bit(std::size_t i) const noexcept { return (words[i / kWordBits] >> (i % kWordBits)) & 1U; }
  std::vector<double> unpack() const;

  friend bool operator==(const PackedBits&, const PackedBits&) = default;
};

/// Sign-binarized weight matrix of shape d_in x d_out with a per-output
/// channel scale. Bits are stored channel-major: channel c occupies
/// words [c * words_per_channel, (c + 1) * words_per_channel), bit i of that
/// run is the sign of W[i][c], and each channel run is zero-padded to a word
/// boundary.
struct BinaryLayer {
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  std::vector<std::uint64_t> bits;
  std::vector<double> alpha;
  /// Channels whose scale hit the epsilon floor (all-zero weights).
  std::vector<std::size_t> floored_channels;

  std::size_t words_per_channel() const noexcept { return words_for(d_in); }
  std::span<const std::uint64_t> channel(std::size_t c) const noexcept {
    return {bits.data() + c * words_per_channel(), words_per_channel()};
  }
  bool sign_bit(std::size_t row, std::size_t c) const noexcept {
    return (bits[c * words_per_channel() + row / kWordBits] >> (row % kWordBits)) & 1U;
  }

  /// +/-1 matrix (d_in x d_out) decoded from the bits.
  Tensor signs() const;
  /// alpha (.) b as a dense d_in x d_out matrix.
  Tensor dequantize() const;
  void validate() const;

  friend bool operator==(const BinaryLayer&, const BinaryLayer&) = default;
};

/// Packs sign(w) (sign(0) = +1) of a d_in x d_out matrix, channel-major.
std::vector<std::uint64_t> pack_signs(const Tensor& w);

}  // namespace bxf
