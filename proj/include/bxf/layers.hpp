// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bxf/autodiff.hpp"
#include "bxf/bits.hpp"
#include "bxf/conv.hpp"
#include "bxf/dataset.hpp"
#include "bxf/rng.hpp"
#include "bxf/tensor.hpp"

namespace bxf {

enum class LayerKind { dense, conv2d };

/// A weight layer. Dense weights are d_in x d_out; conv weights are kept
/// matricized as (n_in*k*k) x n_out so both kinds share one code path.
/// Hidden activations are implied: ReLU, or sign when the consuming layer
/// runs on binary inputs.
struct Layer {
  LayerKind kind = LayerKind::dense;
  std::size_t d_in = 0;
  std::size_t d_out = 0;
  ConvGeometry conv;
  bool keep_full_precision = false;

  Tensor weight;
  /// Set once the layer has been finalized to 1-bit weights.
  std::optional<BinaryLayer> binary;
  /// Normalized latent weights the layer was finalized from (training only).
  Tensor latent;

  std::size_t input_len() const noexcept { return kind == LayerKind::dense ? d_in : conv.input_len(); }
  std::size_t output_len() const noexcept { return kind == LayerKind::dense ? d_out : conv.output_len(); }
  /// Rows fed to the weight matmul per sample (1 for dense, P for conv).
  std::size_t positions() const noexcept { return kind == LayerKind::dense ? 1 : conv.positions(); }
};

struct Network {
  std::size_t input_dim = 0;
  std::vector<Layer> layers;
  bool binarize_activations = true;

  bool quantizable(std::size_t i) const { return !layers.at(i).keep_full_precision; }
  std::size_t num_classes() const { return layers.empty() ? 0 : layers.back().output_len(); }
  std::vector<std::size_t> quantizable_layers() const;
  /// Consecutive layers chain and weights have matricized shapes.
  void validate() const;

  Network& add_dense(std::size_t d_out, Rng& rng);
  Network& add_conv(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                    std::size_t out_channels, std::size_t kernel, std::size_t stride,
                    std::size_t padding, Rng& rng);
};

/// dims = {d_0, hidden..., classes}. First and last layers keep full precision.
Network make_mlp(std::span<const std::size_t> dims, std::uint64_t seed);

/// Per-layer weight operand for forward_graph. When `channel_scale` is set,
/// the layer computes (x * weight) * diag(channel_scale).
struct LayerBinding {
  ad::Var weight;
  std::optional<ad::Var> channel_scale;
};

/// Which layers consume sign-binarized inputs. A quantizable layer does once
/// it is finalized, or while it is the layer under quantization.
std::vector<bool> sign_input_mask(const Network& net, std::optional<std::size_t> quantizing = {});

/// Constant bindings: binarized layers as sign matrix + alpha, others as
/// their full-precision weights.
std::vector<LayerBinding> frozen_bindings(ad::Tape& tape, const Network& net);

/// Builds the forward graph. When `capture_layer` is set, the matrix fed to
/// that layer's matmul (patches for conv) is copied into `captured`.
ad::Var forward_graph(ad::Tape& tape, const Network& net, std::span<const LayerBinding> bindings,
                      ad::Var input, const std::vector<bool>& sign_input,
                      std::optional<std::size_t> capture_layer = {}, Tensor* captured = nullptr);

/// Logits of the network as deployed (binarized layers use alpha (.) b).
Tensor forward(const Network& net, const Tensor& batch, std::optional<std::size_t> quantizing = {});

/// Matrix of inputs reaching `layer` for every sample (patch rows for conv).
Tensor layer_inputs(const Network& net, const Tensor& batch, std::size_t layer,
                    std::optional<std::size_t> quantizing = {});

double accuracy(const Network& net, const Dataset& data, std::optional<std::size_t> quantizing = {});
double mean_task_loss(const Network& net, const Dataset& data);

/// Inputs captured for one layer, capped by reservoir sampling.
class LayerInputBuffer {
 public:
  LayerInputBuffer(std::size_t layer, std::size_t dim, std::size_t capacity, std::uint64_t seed);

  void append(const Tensor& rows);
  std::size_t layer() const noexcept { return layer_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  std::size_t seen() const noexcept { return seen_; }
  /// count x dim matrix of the retained vectors.
  Tensor matrix() const;

 private:
  std::size_t layer_;
  std::size_t dim_;
  std::size_t capacity_;
  std::size_t count_ = 0;
  std::size_t seen_ = 0;
  std::vector<double> rows_;
  Rng rng_;
};

inline constexpr std::size_t kDefaultBufferCapacity = 4096;

LayerInputBuffer capture_inputs(const Network& net, const Dataset& data, std::size_t layer,
                                std::optional<std::size_t> quantizing, std::size_t capacity,
                                std::uint64_t seed);

struct PretrainOptions {
  std::size_t epochs = 100;
  double lr = 1e-2;
  std::size_t batch_size = 64;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  double train_accuracy = 0.0;
};

/// Full-precision training with softmax cross-entropy and Adam.
PretrainResult pretrain(Network& net, const Dataset& data, const PretrainOptions& options);

/// Shuffled minibatch index lists for one epoch.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng);

// Checkpoint container; layout documented in docs/checkpoint.md.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);
std::vector<std::uint8_t> serialize_network(const Network& net);
Network deserialize_network(std::span<const std::uint8_t> bytes);

}  // namespace bxf
