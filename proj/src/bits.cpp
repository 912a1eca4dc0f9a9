// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/bits.hpp"

#include <cmath>

#include "bxf/error.hpp"

namespace bxf {

PackedBits PackedBits::pack(std::span<const double> values) {
  PackedBits p;
  p.valid_bits = values.size();
  p.words.assign(words_for(values.size()), 0);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] >= 0.0) p.words[i / kWordBits] |= std::uint64_t{1} << (i % kWordBits);
  return p;
}

std::vector<double> PackedBits::unpack() const {
  std::vector<double> out(valid_bits);
  for (std::size_t i = 0; i < valid_bits; ++i) out[i] = bit(i) ? 1.0 : -1.0;
  return out;
}

std::vector<std::uint64_t> pack_signs(const Tensor& w) {
  require(w.rank() == 2, ErrorCode::dimension, "pack_signs expects a matrix");
  const std::size_t rows = w.rows(), cols = w.cols(), wpc = words_for(rows);
  std::vector<std::uint64_t> bits(cols * wpc, 0);
  for (std::size_t c = 0; c < cols; ++c)
    for (std::size_t r = 0; r < rows; ++r)
      if (w(r, c) >= 0.0) bits[c * wpc + r / kWordBits] |= std::uint64_t{1} << (r % kWordBits);
  return bits;
}

Tensor BinaryLayer::signs() const {
  Tensor s = Tensor::matrix(d_in, d_out);
  for (std::size_t c = 0; c < d_out; ++c)
    for (std::size_t r = 0; r < d_in; ++r) s(r, c) = sign_bit(r, c) ? 1.0 : -1.0;
  return s;
}

Tensor BinaryLayer::dequantize() const {
  Tensor s = signs();
  for (std::size_t r = 0; r < d_in; ++r)
    for (std::size_t c = 0; c < d_out; ++c) s(r, c) *= alpha[c];
  return s;
}

void BinaryLayer::validate() const {
  require(bits.size() == d_out * words_per_channel(), ErrorCode::contract,
          "binary layer bit storage does not match its shape");
  require(alpha.size() == d_out, ErrorCode::contract, "binary layer needs one alpha per channel");
  for (double a : alpha)
    require(a > 0.0 && std::isfinite(a), ErrorCode::contract, "binary layer alpha must be > 0");
  const std::size_t tail = d_in % kWordBits;
  if (tail != 0) {
    const std::uint64_t pad_mask = ~((std::uint64_t{1} << tail) - 1);
    for (std::size_t c = 0; c < d_out; ++c)
      require((bits[(c + 1) * words_per_channel() - 1] & pad_mask) == 0, ErrorCode::contract,
              "binary layer padding bits must be zero");
  }
}

}  // namespace bxf
