// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bxf/bits.hpp"
#include "bxf/layers.hpp"
#include "bxf/tensor.hpp"

namespace bxf {

/// One sample's sign activations; bit 1 is +1, padding bits are zero.
using PackedActivation = PackedBits;

/// Sum of a_i * w_i over the first `valid_bits` +/-1 entries:
/// valid_bits - 2 * popcount(a xor w). Both operands must span
/// words_for(valid_bits) words.
std::int64_t binary_dot(std::span<const std::uint64_t> a, std::span<const std::uint64_t> w,
                        std::size_t valid_bits);
std::int64_t binary_dot(const PackedActivation& a, std::span<const std::uint64_t> w,
                        std::size_t valid_bits);

/// Same sum restricted to positions whose `mask` bit is set (conv zero
/// padding contributes nothing): popcount(mask) - 2 * popcount((a xor w) & mask).
std::int64_t binary_dot_masked(std::span<const std::uint64_t> a, std::span<const std::uint64_t> w,
                               std::span<const std::uint64_t> mask);

/// Deployment form of a network. Layers fed by sign activations run on
/// packed bits; the rest (first and last) run in float.
struct BinaryNetwork {
  struct Stage {
    LayerKind kind = LayerKind::dense;
    ConvGeometry conv;
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    bool bit_input = false;
    /// Float path weight (dequantized when the layer is binary).
    Tensor weight;
    /// Bit path weights.
    BinaryLayer binary;
    /// Conv only: per-position validity of patch entries, packed.
    std::vector<PackedBits> valid;
  };

  std::size_t input_dim = 0;
  std::vector<Stage> stages;

  /// Contract error unless every quantizable hidden layer is finalized and
  /// activations are binarized.
  static BinaryNetwork from_network(const Network& net);

  /// +/-1 multiply-accumulates per sample on the bit path.
  std::size_t binary_macs_per_sample() const;
};

/// Logits. When `stage_inputs` is given it receives the activation entering
/// each stage (the +/-1 signs for bit stages), before any unfolding.
Tensor binary_forward(const BinaryNetwork& net, const Tensor& batch,
                      std::vector<Tensor>* stage_inputs = nullptr);
Tensor binary_forward(const Network& net, const Tensor& batch);

struct BenchmarkResult {
  std::size_t samples = 0;
  std::size_t repeats = 0;
  double seconds = 0.0;
  double samples_per_sec = 0.0;
  /// Binary multiply-accumulates per second on the bit path.
  double binary_ops_per_sec = 0.0;
};

BenchmarkResult benchmark_binary_forward(const BinaryNetwork& net, const Tensor& batch,
                                         std::size_t repeats);

}  // namespace bxf
