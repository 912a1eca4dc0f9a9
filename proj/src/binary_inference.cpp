// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/binary_inference.hpp"

#include <bit>
#include <chrono>

#include "bxf/conv.hpp"
#include "bxf/error.hpp"

namespace bxf {

std::int64_t binary_dot(std::span<const std::uint64_t> a, std::span<const std::uint64_t> w,
                        std::size_t valid_bits) {
  const std::size_t n = words_for(valid_bits);
  require(a.size() == n && w.size() == n, ErrorCode::dimension,
          "binary_dot: operands of " + std::to_string(a.size()) + " and " + std::to_string(w.size()) +
              " words for " + std::to_string(valid_bits) + " valid bits");
  std::int64_t diff = 0;
  for (std::size_t i = 0; i < n; ++i) diff += std::popcount(a[i] ^ w[i]);
  return static_cast<std::int64_t>(valid_bits) - 2 * diff;
}

std::int64_t binary_dot(const PackedActivation& a, std::span<const std::uint64_t> w,
                        std::size_t valid_bits) {
  require(a.valid_bits == valid_bits, ErrorCode::dimension,
          "binary_dot: activation has " + std::to_string(a.valid_bits) + " bits, weights " +
              std::to_string(valid_bits));
  return binary_dot(std::span<const std::uint64_t>(a.words), w, valid_bits);
}

std::int64_t binary_dot_masked(std::span<const std::uint64_t> a, std::span<const std::uint64_t> w,
                               std::span<const std::uint64_t> mask) {
  require(a.size() == mask.size() && w.size() == mask.size(), ErrorCode::dimension,
          "binary_dot_masked: operand lengths differ");
  std::int64_t valid = 0, diff = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    valid += std::popcount(mask[i]);
    diff += std::popcount((a[i] ^ w[i]) & mask[i]);
  }
  return valid - 2 * diff;
}

BinaryNetwork BinaryNetwork::from_network(const Network& net) {
  net.validate();
  require(net.binarize_activations, ErrorCode::contract,
          "binary inference needs sign activations between binarized layers");
  const auto mask = sign_input_mask(net);
  BinaryNetwork out;
  out.input_dim = net.input_dim;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    require(!net.quantizable(i) || l.binary.has_value() || i == 0, ErrorCode::contract,
            "layer " + std::to_string(i) + " is quantizable but not binarized");
    Stage s;
    s.kind = l.kind;
    s.conv = l.conv;
    s.d_in = l.d_in;
    s.d_out = l.d_out;
    s.bit_input = mask[i];
    if (s.bit_input) {
      s.binary = *l.binary;
      s.binary.validate();
      if (l.kind == LayerKind::conv2d) {
        const Tensor valid = patch_validity(l.conv);
        for (std::size_t p = 0; p < valid.rows(); ++p) {
          PackedBits bits;
          bits.valid_bits = valid.cols();
          bits.words.assign(words_for(valid.cols()), 0);
          for (std::size_t j = 0; j < valid.cols(); ++j)
            if (valid(p, j) != 0.0) bits.words[j / kWordBits] |= std::uint64_t{1} << (j % kWordBits);
          s.valid.push_back(std::move(bits));
        }
      }
    } else {
      s.weight = l.binary ? l.binary->dequantize() : l.weight;
    }
    out.stages.push_back(std::move(s));
  }
  return out;
}

std::size_t BinaryNetwork::binary_macs_per_sample() const {
  std::size_t total = 0;
  for (const Stage& s : stages)
    if (s.bit_input)
      total += s.d_in * s.d_out * (s.kind == LayerKind::conv2d ? s.conv.positions() : 1);
  return total;
}

namespace {

// Rows of `m` (one matmul input per row) times the float weight.
Tensor float_stage(const BinaryNetwork::Stage& s, const Tensor& x) {
  const Tensor m = s.kind == LayerKind::conv2d ? unfold_batch(x, s.conv) : x;
  Tensor y = matmul(m, s.weight);
  return s.kind == LayerKind::conv2d ? fold_outputs(y, s.conv.positions()) : y;
}

Tensor bit_stage(const BinaryNetwork::Stage& s, const Tensor& signs) {
  const bool conv = s.kind == LayerKind::conv2d;
  // Padding entries unfold to 0, which packs as +1; the validity mask drops them.
  const Tensor m = conv ? unfold_batch(signs, s.conv) : signs;
  const std::size_t positions = conv ? s.conv.positions() : 1;
  const BinaryLayer& b = s.binary;
  Tensor y = Tensor::matrix(m.rows(), b.d_out);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const PackedActivation a = PackedBits::pack(m.data().subspan(r * m.cols(), m.cols()));
    const PackedBits* valid = conv ? &s.valid[r % positions] : nullptr;
    for (std::size_t c = 0; c < b.d_out; ++c) {
      const std::int64_t dot = valid ? binary_dot_masked(a.words, b.channel(c), valid->words)
                                     : binary_dot(a, b.channel(c), b.d_in);
      y(r, c) = b.alpha[c] * static_cast<double>(dot);
    }
  }
  return conv ? fold_outputs(y, positions) : y;
}

}  // namespace

Tensor binary_forward(const BinaryNetwork& net, const Tensor& batch,
                      std::vector<Tensor>* stage_inputs) {
  require(batch.rank() == 2 && batch.cols() == net.input_dim, ErrorCode::dimension,
          "binary_forward: batch must be N x " + std::to_string(net.input_dim));
  Tensor x = batch;
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    const BinaryNetwork::Stage& s = net.stages[i];
    if (s.bit_input) {
      for (double& v : x.storage()) v = v >= 0.0 ? 1.0 : -1.0;
    } else if (i > 0) {
      for (double& v : x.storage()) v = v > 0.0 ? v : 0.0;
    }
    if (stage_inputs) stage_inputs->push_back(x);
    x = s.bit_input ? bit_stage(s, x) : float_stage(s, x);
  }
  return x;
}

Tensor binary_forward(const Network& net, const Tensor& batch) {
  return binary_forward(BinaryNetwork::from_network(net), batch);
}

BenchmarkResult benchmark_binary_forward(const BinaryNetwork& net, const Tensor& batch,
                                         std::size_t repeats) {
  require(repeats >= 1, ErrorCode::argument, "benchmark needs at least one repeat");
  BenchmarkResult r;
  r.samples = batch.rows();
  r.repeats = repeats;
  const auto start = std::chrono::steady_clock::now();
  double sink = 0.0;
  for (std::size_t i = 0; i < repeats; ++i) sink += binary_forward(net, batch)[0];
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  (void)sink;
  const double total = static_cast<double>(r.samples * repeats);
  if (r.seconds > 0.0) {
    r.samples_per_sec = total / r.seconds;
    r.binary_ops_per_sec = total * static_cast<double>(net.binary_macs_per_sample()) / r.seconds;
  }
  return r;
}

}  // namespace bxf
