// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bxf/binary_inference.hpp"
#include "bxf/conv.hpp"
#include "bxf/error.hpp"
#include "bxf/quantizer.hpp"
#include "gradcheck.hpp"

using namespace bxf;
using bxf::testing::random_tensor;

namespace {

std::vector<double> random_signs(std::size_t n, std::mt19937_64& rng) {
  std::vector<double> v(n);
  std::bernoulli_distribution coin(0.5);
  for (double& x : v) x = coin(rng) ? 1.0 : -1.0;
  return v;
}

std::int64_t loop_dot(const std::vector<double>& a, const std::vector<double>& b) {
  std::int64_t s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<std::int64_t>(a[i] * b[i]);
  return s;
}

void binarize_hidden(Network& net) {
  for (std::size_t l : net.quantizable_layers()) {
    net.layers[l].binary = quantize_mse(net.layers[l].weight);
    net.layers[l].weight = net.layers[l].binary->dequantize();
  }
}

// 1x6x6 image -> conv 3x3 (float) -> conv 3x3 pad 1 stride 1 (binary)
// -> conv 2x2 stride 2 pad 1 (binary) -> dense (float).
Network conv_net(std::uint64_t seed) {
  Rng rng = make_rng(seed, "init");
  Network net;
  net.input_dim = 36;
  net.add_conv(1, 6, 6, 3, 3, 1, 0, rng);
  net.add_conv(3, 4, 4, 4, 3, 1, 1, rng);
  net.add_conv(4, 4, 4, 5, 2, 2, 1, rng);
  net.add_dense(3, rng);
  net.layers.front().keep_full_precision = true;
  net.layers.back().keep_full_precision = true;
  net.validate();
  return net;
}

void check_equivalence(const Network& net, const Tensor& batch) {
  const BinaryNetwork bn = BinaryNetwork::from_network(net);
  std::vector<Tensor> trace;
  const Tensor logits = binary_forward(bn, batch, &trace);
  const Tensor reference = forward(net, batch);
  REQUIRE(logits.same_shape(reference));
  CHECK(max_abs_diff(logits, reference) <= 1e-12);
  REQUIRE(trace.size() == net.layers.size());
  for (std::size_t l = 1; l < net.layers.size(); ++l) {
    const Tensor fed = layer_inputs(net, batch, l);
    const Layer& layer = net.layers[l];
    const Tensor mine = layer.kind == LayerKind::conv2d ? unfold_batch(trace[l], layer.conv) : trace[l];
    REQUIRE(mine.same_shape(fed));
    if (bn.stages[l].bit_input) {
      CHECK(mine == fed);  // exact sign patterns
    } else {
      CHECK(max_abs_diff(mine, fed) <= 1e-12);
    }
  }
}

}  // namespace

TEST_CASE("binary_dot closed cases") {
  std::mt19937_64 rng(1);
  const auto w = random_signs(64, rng);
  std::vector<double> neg(w);
  for (double& x : neg) x = -x;
  const PackedBits pw = PackedBits::pack(w);
  CHECK(binary_dot(pw, pw.words, 64) == 64);
  CHECK(binary_dot(PackedBits::pack(neg), pw.words, 64) == -64);
  const auto w100 = random_signs(100, rng);
  std::vector<double> neg100(w100);
  for (double& x : neg100) x = -x;
  CHECK(binary_dot(PackedBits::pack(neg100), PackedBits::pack(w100).words, 100) == -100);
}

TEST_CASE("binary_dot matches the integer loop for every length 1..256") {
  std::mt19937_64 rng(2);
  for (std::size_t n = 1; n <= 256; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto a = random_signs(n, rng), b = random_signs(n, rng);
      CHECK(binary_dot(PackedBits::pack(a), PackedBits::pack(b).words, n) == loop_dot(a, b));
    }
  }
  // All pairs for short vectors.
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::uint64_t x = 0; x < (1U << n); ++x)
      for (std::uint64_t y = 0; y < (1U << n); ++y) {
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
          a[i] = (x >> i) & 1U ? 1.0 : -1.0;
          b[i] = (y >> i) & 1U ? 1.0 : -1.0;
        }
        CHECK(binary_dot(PackedBits::pack(a), PackedBits::pack(b).words, n) == loop_dot(a, b));
      }
  }
}

TEST_CASE("binary_dot rejects mismatched lengths") {
  std::mt19937_64 rng(3);
  const PackedBits a = PackedBits::pack(random_signs(65, rng));
  const PackedBits b = PackedBits::pack(random_signs(64, rng));
  CHECK_THROWS_AS(binary_dot(a, b.words, 64), Error);
  CHECK_THROWS_AS(binary_dot(a.words, b.words, 65), Error);
  try {
    binary_dot(a, b.words, 65);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::dimension);
  }
}

TEST_CASE("masked dot skips masked-out positions") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.7);
  for (std::size_t n = 1; n <= 200; n += 7) {
    const auto a = random_signs(n, rng), b = random_signs(n, rng);
    std::vector<double> m(n);
    std::int64_t expect = 0;
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = coin(rng) ? 1.0 : -1.0;  // +1 -> bit set -> position counted
      if (m[i] > 0) expect += static_cast<std::int64_t>(a[i] * b[i]);
    }
    CHECK(binary_dot_masked(PackedBits::pack(a).words, PackedBits::pack(b).words,
                            PackedBits::pack(m).words) == expect);
  }
}

TEST_CASE("pack then unpack preserves sign patterns") {
  std::mt19937_64 rng(5);
  for (std::size_t n : {1, 63, 64, 65, 128, 200}) {
    Tensor v = random_tensor({n}, rng);
    const PackedBits p = PackedBits::pack(v.data());
    const auto back = p.unpack();
    for (std::size_t i = 0; i < n; ++i) CHECK(back[i] == (v[i] >= 0 ? 1.0 : -1.0));
    if (n % 64 != 0) CHECK((p.words.back() >> (n % 64)) == 0);
  }
}

TEST_CASE("single binary layer with all +1 inputs and weights") {
  Rng rng = make_rng(1, "init");
  Network net;
  net.input_dim = 3;
  net.add_dense(10, rng).add_dense(4, rng).add_dense(2, rng);
  net.layers.front().keep_full_precision = true;
  net.layers.back().keep_full_precision = true;
  net.layers[0].weight = Tensor::matrix(3, 10, 1.0);
  net.layers[1].binary = quantize_mse(Tensor::matrix(10, 4, 1.0));
  net.layers[1].weight = net.layers[1].binary->dequantize();
  net.layers[2].weight = Tensor::matrix(4, 2, 0.0);
  net.layers[2].weight(0, 0) = 1.0;
  std::vector<Tensor> trace;
  const Tensor x = Tensor::from_rows({{0.5, 0.2, 0.1}});
  const Tensor out = binary_forward(BinaryNetwork::from_network(net), x, &trace);
  CHECK(trace[1] == Tensor::matrix(1, 10, 1.0));
  CHECK(out(0, 0) == 10.0);  // pre-activation = d_in, then ReLU and a pass-through
}

TEST_CASE("binary forward equals the float sign simulation (dense)") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const std::vector<std::size_t> dims{5, 70, 130, 33, 4};
    Network net = make_mlp(dims, seed);
    binarize_hidden(net);
    std::mt19937_64 rng(seed);
    check_equivalence(net, random_tensor({100, 5}, rng, -2.0, 2.0));
  }
}

TEST_CASE("binary forward equals the float sign simulation (conv with padding)") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Network net = conv_net(seed);
    binarize_hidden(net);
    std::mt19937_64 rng(seed);
    check_equivalence(net, random_tensor({100, 36}, rng, -1.0, 1.0));
  }
}

TEST_CASE("contract errors") {
  const std::vector<std::size_t> dims{3, 6, 6, 2};
  Network net = make_mlp(dims, 1);
  try {
    BinaryNetwork::from_network(net);
    FAIL("expected a contract error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::contract);
  }
  binarize_hidden(net);
  CHECK_NOTHROW(BinaryNetwork::from_network(net));
  net.binarize_activations = false;
  CHECK_THROWS_AS(BinaryNetwork::from_network(net), Error);
  net.binarize_activations = true;
  const BinaryNetwork bn = BinaryNetwork::from_network(net);
  CHECK_THROWS_AS(binary_forward(bn, Tensor::matrix(2, 4)), Error);
}

TEST_CASE("benchmark reports throughput") {
  const std::vector<std::size_t> dims{8, 64, 64, 4};
  Network net = make_mlp(dims, 1);
  binarize_hidden(net);
  const BinaryNetwork bn = BinaryNetwork::from_network(net);
  CHECK(bn.binary_macs_per_sample() == 64 * 64);
  std::mt19937_64 rng(1);
  const BenchmarkResult r = benchmark_binary_forward(bn, random_tensor({32, 8}, rng), 3);
  CHECK(r.samples == 32);
  CHECK(r.repeats == 3);
  CHECK(r.seconds >= 0.0);
  CHECK(r.binary_ops_per_sec >= 0.0);
  CHECK_THROWS_AS(benchmark_binary_forward(bn, random_tensor({1, 8}, rng), 0), Error);
}
