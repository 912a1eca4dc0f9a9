// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bxf/error.hpp"
#include "bxf/optim.hpp"

namespace bxf {

namespace {

constexpr std::size_t kEvalChunk = 512;

Tensor he_normal(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor w = Tensor::matrix(rows, cols);
  for (double& v : w.storage()) v = dist(rng);
  return w;
}

}  // namespace

std::vector<std::size_t> Network::quantizable_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (quantizable(i)) out.push_back(i);
  return out;
}

void Network::validate() const {
  require(!layers.empty(), ErrorCode::contract, "network has no layers");
  std::size_t width = input_dim;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    require(l.input_len() == width, ErrorCode::dimension,
            "layer " + std::to_string(i) + " expects input width " +
                std::to_string(l.input_len()) + " but receives " + std::to_string(width));
    if (l.kind == LayerKind::conv2d) {
      l.conv.validate();
      require(l.d_in == l.conv.patch_len() && l.d_out == l.conv.out_channels, ErrorCode::dimension,
              "conv layer " + std::to_string(i) + " matricized shape mismatch");
    }
    require(l.weight.rank() == 2 && l.weight.rows() == l.d_in && l.weight.cols() == l.d_out,
            ErrorCode::dimension,
            "layer " + std::to_string(i) + " weight shape " + l.weight.shape_string());
    if (l.binary) {
      require(l.binary->d_in == l.d_in && l.binary->d_out == l.d_out, ErrorCode::dimension,
              "layer " + std::to_string(i) + " binary shape mismatch");
      l.binary->validate();
    }
    width = l.output_len();
  }
}

Network& Network::add_dense(std::size_t d_out, Rng& rng) {
  Layer l;
  l.kind = LayerKind::dense;
  l.d_in = layers.empty() ? input_dim : layers.back().output_len();
  l.d_out = d_out;
  l.weight = he_normal(l.d_in, d_out, l.d_in, rng);
  layers.push_back(std::move(l));
  return *this;
}

Network& Network::add_conv(std::size_t in_channels, std::size_t in_h, std::size_t in_w,
                           std::size_t out_channels, std::size_t kernel, std::size_t stride,
                           std::size_t padding, Rng& rng) {
  Layer l;
  l.kind = LayerKind::conv2d;
  l.conv = ConvGeometry{in_channels, in_h, in_w, out_channels, kernel, stride, padding};
  l.conv.validate();
  l.d_in = l.conv.patch_len();
  l.d_out = out_channels;
  l.weight = he_normal(l.d_in, l.d_out, l.d_in, rng);
  layers.push_back(std::move(l));
  return *this;
}

Network make_mlp(std::span<const std::size_t> dims, std::uint64_t seed) {
  require(dims.size() >= 2, ErrorCode::argument, "an MLP needs at least input and output sizes");
  Rng rng = make_rng(seed, "init");
  Network net;
  net.input_dim = dims[0];
  for (std::size_t i = 1; i < dims.size(); ++i) net.add_dense(dims[i], rng);
  net.layers.front().keep_full_precision = true;
  net.layers.back().keep_full_precision = true;
  return net;
}

std::vector<bool> sign_input_mask(const Network& net, std::optional<std::size_t> quantizing) {
  std::vector<bool> mask(net.layers.size(), false);
  if (!net.binarize_activations) return mask;
  // The raw data feeding layer 0 is never binarized.
  for (std::size_t i = 1; i < net.layers.size(); ++i)
    mask[i] = net.quantizable(i) && (net.layers[i].binary.has_value() || quantizing == i);
  return mask;
}

std::vector<LayerBinding> frozen_bindings(ad::Tape& tape, const Network& net) {
  std::vector<LayerBinding> out;
  out.reserve(net.layers.size());
  for (const Layer& l : net.layers) {
    if (l.binary) {
      out.push_back({tape.constant(l.binary->signs()),
                     tape.constant(Tensor::vector(l.binary->alpha))});
    } else {
      out.push_back({tape.constant(l.weight), std::nullopt});
    }
  }
  return out;
}

ad::Var forward_graph(ad::Tape& tape, const Network& net, std::span<const LayerBinding> bindings,
                      ad::Var input, const std::vector<bool>& sign_input,
                      std::optional<std::size_t> capture_layer, Tensor* captured) {
  require(bindings.size() == net.layers.size() && sign_input.size() == net.layers.size(),
          ErrorCode::contract, "forward_graph: one binding and mask entry per layer required");
  require(input.value().cols() == net.input_dim, ErrorCode::dimension,
          "batch feature dimension " + std::to_string(input.value().cols()) + " != d_0 " +
              std::to_string(net.input_dim));
  (void)tape;
  ad::Var x = input;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& l = net.layers[i];
    if (i > 0) x = sign_input[i] ? ad::sign_ste(x) : ad::relu(x);
    ad::Var m = l.kind == LayerKind::conv2d ? ad::unfold(x, l.conv) : x;
    if (capture_layer == i && captured != nullptr) *captured = m.value();
    ad::Var y = ad::matmul(m, bindings[i].weight);
    if (bindings[i].channel_scale) y = ad::col_scale(y, *bindings[i].channel_scale);
    if (l.kind == LayerKind::conv2d) y = ad::fold(y, l.conv.positions());
    x = y;
  }
  return x;
}

namespace {

Tensor run_chunks(const Network& net, const Tensor& batch, std::optional<std::size_t> quantizing,
                  std::optional<std::size_t> capture) {
  const auto mask = sign_input_mask(net, quantizing);
  Tensor out;
  std::vector<double> acc;
  std::size_t cols = 0;
  for (std::size_t begin = 0; begin < batch.rows(); begin += kEvalChunk) {
    const std::size_t end = std::min(batch.rows(), begin + kEvalChunk);
    ad::Tape tape;
    auto bindings = frozen_bindings(tape, net);
    ad::Var x = tape.constant(slice_rows(batch, begin, end));
    Tensor captured;
    ad::Var y = forward_graph(tape, net, bindings, x, mask, capture, &captured);
    const Tensor& part = capture ? captured : y.value();
    cols = part.cols();
    acc.insert(acc.end(), part.data().begin(), part.data().end());
  }
  const std::size_t rows = acc.size() / std::max<std::size_t>(cols, 1);
  return Tensor({rows, cols}, std::move(acc));
}

}  // namespace

Tensor forward(const Network& net, const Tensor& batch, std::optional<std::size_t> quantizing) {
  return run_chunks(net, batch, quantizing, std::nullopt);
}

Tensor layer_inputs(const Network& net, const Tensor& batch, std::size_t layer,
                    std::optional<std::size_t> quantizing) {
  require(layer < net.layers.size(), ErrorCode::argument, "layer index out of range");
  return run_chunks(net, batch, quantizing, layer);
}

double accuracy(const Network& net, const Dataset& data, std::optional<std::size_t> quantizing) {
  if (data.size() == 0) return 0.0;
  const Tensor logits = forward(net, data.features, quantizing);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols(); ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    if (static_cast<int>(best) == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_task_loss(const Network& net, const Dataset& data) {
  ad::Tape tape;
  ad::Var z = tape.constant(forward(net, data.features));
  return ad::softmax_cross_entropy(z, data.labels).value().item();
}

LayerInputBuffer::LayerInputBuffer(std::size_t layer, std::size_t dim, std::size_t capacity,
                                   std::uint64_t seed)
    : layer_(layer), dim_(dim), capacity_(capacity), rng_(seed) {
  require(capacity >= 1, ErrorCode::argument, "buffer capacity must be >= 1");
}

void LayerInputBuffer::append(const Tensor& rows) {
  require(rows.cols() == dim_, ErrorCode::dimension,
          "captured vector length " + std::to_string(rows.cols()) + " != " + std::to_string(dim_));
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const double* src = rows.data().data() + r * dim_;
    ++seen_;
    if (count_ < capacity_) {
      rows_.insert(rows_.end(), src, src + dim_);
      ++count_;
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, seen_ - 1);
      const std::size_t j = pick(rng_);
      if (j < capacity_) std::copy(src, src + dim_, rows_.begin() + static_cast<std::ptrdiff_t>(j * dim_));
    }
  }
}

Tensor LayerInputBuffer::matrix() const { return Tensor({count_, dim_}, rows_); }

LayerInputBuffer capture_inputs(const Network& net, const Dataset& data, std::size_t layer,
                                std::optional<std::size_t> quantizing, std::size_t capacity,
                                std::uint64_t seed) {
  LayerInputBuffer buf(layer, net.layers.at(layer).d_in, capacity, seed);
  buf.append(layer_inputs(net, data.features, layer, quantizing));
  return buf;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  require(batch_size >= 1, ErrorCode::argument, "batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
  return out;
}

PretrainResult pretrain(Network& net, const Dataset& data, const PretrainOptions& options) {
  require(data.size() > 0, ErrorCode::argument, "pretrain needs a nonempty dataset");
  net.validate();
  PretrainResult result;
  result.initial_loss = mean_task_loss(net, data);
  Rng rng = make_rng(options.seed, "data");
  Adam adam(net.layers.size());
  const auto mask = sign_input_mask(net);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& idx : make_batches(data.size(), options.batch_size, rng)) {
      ad::Tape tape;
      std::vector<LayerBinding> bindings;
      for (const Layer& l : net.layers) {
        if (l.binary) {
          bindings.push_back({tape.constant(l.binary->signs()),
                              tape.constant(Tensor::vector(l.binary->alpha))});
        } else {
          bindings.push_back({tape.leaf(l.weight, true), std::nullopt});
        }
      }
      ad::Var x = tape.constant(gather_rows(data.features, idx));
      std::vector<int> y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) y[i] = data.labels[idx[i]];
      ad::Var loss = ad::softmax_cross_entropy(forward_graph(tape, net, bindings, x, mask), y);
      tape.backward(loss);
      for (std::size_t i = 0; i < net.layers.size(); ++i)
        if (!net.layers[i].binary) adam.update(i, net.layers[i].weight, bindings[i].weight.grad(), options.lr);
      adam.tick();
      total += loss.value().item() * static_cast<double>(idx.size());
    }
    result.epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  result.train_accuracy = accuracy(net, data);
  return result;
}

}  // namespace bxf
