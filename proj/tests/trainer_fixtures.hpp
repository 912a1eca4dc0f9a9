// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "bxf/dataset.hpp"
#include "bxf/layers.hpp"
#include "bxf/rng.hpp"
#include "bxf/trainer.hpp"

namespace bxf::testing {

inline Dataset small_data(std::uint64_t seed, std::size_t n = 60) {
  GaussianSpec spec;
  spec.n = n;
  spec.dim = 3;
  spec.classes = 3;
  spec.informative = 3;
  return make_gaussians(spec, seed);
}

inline Network small_net(std::uint64_t seed) {
  const std::vector<std::size_t> dims{3, 5, 4, 4, 3};
  return make_mlp(dims, seed);
}

inline TrainConfig quick_config() {
  TrainConfig c;
  c.lambda = 2.0;
  c.gamma = 1e-3;
  c.k = 3;
  c.epochs = 2;
  c.finetune_epochs = 1;
  c.lr_quant = 1e-2;
  c.lr_transform = 1e-3;
  c.lr_finetune = 1e-2;
  c.batch_size = 16;
  c.reg_weight = 3.0;
  c.buffer_capacity = 64;
  return c;
}

// CE of logits against labels, averaged over rows.
inline double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    double m = logits(r, 0);
    for (std::size_t c = 1; c < logits.cols(); ++c) m = std::max(m, logits(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits(r, c) - m);
    total += m + std::log(z) - logits(r, static_cast<std::size_t>(labels[r]));
  }
  return total / static_cast<double>(logits.rows());
}

inline Tensor first_rows(const Tensor& m, std::size_t n) {
  Tensor out({n, m.cols()});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

struct Layer2Setup {
  Network net;
  BlockState state;
  Dataset data;
  TrainConfig cfg;
};

// Layer 1 quantized, layer 2 opened in the same block.
inline Layer2Setup block_of_two(std::uint64_t seed, Variant variant = Variant::cross) {
  Layer2Setup s{small_net(seed), {}, small_data(seed), quick_config()};
  s.cfg.variant = variant;
  s.cfg.seed = seed;
  s.net.binarize_activations = true;
  Rng rng = make_rng(seed, "data");
  s.state = open_layer(s.net, s.state, 1, s.data, s.cfg);
  quantize_layer(s.net, s.state, 1, s.data, s.cfg, rng);
  s.state = open_layer(s.net, s.state, 2, s.data, s.cfg);
  return s;
}

// Gradient of the distance term with respect to layer 2's latent when sgn
// passes the surrogate: 2 V S^2 V^T R restricted to layer 2, times
// (1 - sgn'), with R the block-diagonal residual stack of layers 1 (5x4)
// and 2 (4x4).
inline Tensor surrogate_latent_gradient(const Layer2Setup& s, const Tensor& latent) {
  const std::size_t side = s.state.side();
  Tensor r({side, 8});
  const Tensor& l1 = s.net.layers[1].latent;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) r(i, j) = l1(i, j) - ad::sign_value(l1(i, j));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) r(5 + i, 4 + j) = latent(i, j) - ad::sign_value(latent(i, j));
  const Tensor sv = s.state.s();
  const Tensor& v = s.state.V;
  Tensor out({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      double g = 0.0;
      for (std::size_t a = 0; a < side; ++a) {
        double proj = 0.0;
        for (std::size_t b = 0; b < side; ++b) proj += v(b, a) * r(b, 4 + j);
        g += 2.0 * v(5 + i, a) * sv[a] * sv[a] * proj;
      }
      out(i, j) = g * (1.0 - ad::sign_surrogate_derivative(latent(i, j)));
    }
  return out;
}

}  // namespace bxf::testing
