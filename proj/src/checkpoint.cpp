// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

// Network checkpoint container, little-endian throughout:
//
//   "BXFCKPT1"                 8-byte magic
//   u32 version                currently 1
//   u32 flags                  bit 0: binarize_activations
//   u64 input_dim
//   u32 layer_count
//   per layer:
//     u32 kind                 0 dense, 1 conv2d
//     u32 flags                bit 0: keep_full_precision, bit 1: binarized
//     u64 d_in, u64 d_out      matricized weight shape
//     conv2d only: u64 in_channels, in_h, in_w, out_channels, kernel, stride, padding
//     binarized:   u64 word_count, word_count x u64 sign words, d_out x f64 alpha
//     otherwise:   d_in*d_out x f64 weights, row-major

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "bxf/error.hpp"
#include "bxf/layers.hpp"

namespace bxf {

namespace {

constexpr char kMagic[8] = {'B', 'X', 'F', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    require(pos_ + n <= bytes_.size(), ErrorCode::parse,
            "checkpoint truncated at offset " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t size(const char* what) {
    const std::uint64_t v = u64();
    require(v < (std::uint64_t{1} << 32), ErrorCode::parse,
            std::string("implausible ") + what + " at offset " + std::to_string(pos_ - 8));
    return static_cast<std::size_t>(v);
  }
  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_network(const Network& net) {
  net.validate();
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(net.binarize_activations ? 1U : 0U);
  w.u64(net.input_dim);
  w.u32(static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& l : net.layers) {
    w.u32(l.kind == LayerKind::dense ? 0U : 1U);
    w.u32((l.keep_full_precision ? 1U : 0U) | (l.binary ? 2U : 0U));
    w.u64(l.d_in);
    w.u64(l.d_out);
    if (l.kind == LayerKind::conv2d) {
      for (std::size_t v : {l.conv.in_channels, l.conv.in_h, l.conv.in_w, l.conv.out_channels,
                            l.conv.kernel, l.conv.stride, l.conv.padding})
        w.u64(v);
    }
    if (l.binary) {
      w.u64(l.binary->bits.size());
      for (std::uint64_t word : l.binary->bits) w.u64(word);
      for (double a : l.binary->alpha) w.f64(a);
    } else {
      for (double v : l.weight.data()) w.f64(v);
    }
  }
  return w.take();
}

Network deserialize_network(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.take(sizeof kMagic);
  require(std::memcmp(magic.data(), kMagic, sizeof kMagic) == 0, ErrorCode::parse,
          "not a network checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  require(version == kVersion, ErrorCode::parse,
          "unsupported checkpoint version " + std::to_string(version));
  Network net;
  net.binarize_activations = (r.u32() & 1U) != 0;
  net.input_dim = r.size("input_dim");
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    Layer l;
    const std::uint32_t kind = r.u32();
    require(kind <= 1, ErrorCode::parse, "unknown layer kind " + std::to_string(kind));
    l.kind = kind == 0 ? LayerKind::dense : LayerKind::conv2d;
    const std::uint32_t flags = r.u32();
    l.keep_full_precision = (flags & 1U) != 0;
    l.d_in = r.size("d_in");
    l.d_out = r.size("d_out");
    if (l.kind == LayerKind::conv2d) {
      l.conv.in_channels = r.size("in_channels");
      l.conv.in_h = r.size("in_h");
      l.conv.in_w = r.size("in_w");
      l.conv.out_channels = r.size("out_channels");
      l.conv.kernel = r.size("kernel");
      l.conv.stride = r.size("stride");
      l.conv.padding = r.size("padding");
    }
    if ((flags & 2U) != 0) {
      BinaryLayer b;
      b.d_in = l.d_in;
      b.d_out = l.d_out;
      const std::size_t words = r.size("word_count");
      require(words == b.d_out * b.words_per_channel(), ErrorCode::parse,
              "layer " + std::to_string(i) + " word count does not match its shape");
      b.bits.resize(words);
      for (auto& word : b.bits) word = r.u64();
      b.alpha.resize(l.d_out);
      for (double& a : b.alpha) a = r.f64();
      l.weight = b.dequantize();
      l.binary = std::move(b);
    } else {
      r.need(l.d_in * l.d_out * 8);
      l.weight = Tensor::matrix(l.d_in, l.d_out);
      for (double& v : l.weight.storage()) v = r.f64();
    }
    net.layers.push_back(std::move(l));
  }
  require(r.done(), ErrorCode::parse,
          "trailing bytes after checkpoint at offset " + std::to_string(r.offset()));
  try {
    net.validate();
  } catch (const Error& e) {
    fail(ErrorCode::parse, std::string("invalid checkpoint: ") + e.what());
  }
  return net;
}

void save_network(const Network& net, const std::string& path) {
  const auto bytes = serialize_network(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::io, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

Network load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_network(bytes);
}

}  // namespace bxf
