// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "bxf/tensor.hpp"

namespace bxf {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed list of parameter tensors, addressed by slot index.
class Adam {
 public:
  explicit Adam(std::size_t slots, AdamOptions options = {});

  /// One update of `param` with `grad` at learning rate `lr`. The step
  /// counter advances once per call to tick().
  void update(std::size_t slot, Tensor& param, const Tensor& grad, double lr);
  void tick() noexcept { ++step_; }
  std::size_t step() const noexcept { return step_; }

 private:
  AdamOptions opt_;
  std::size_t step_ = 1;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Linear decay from `base` to zero over `total` steps.
inline double linear_decay(double base, std::size_t step, std::size_t total) noexcept {
  if (total == 0) return base;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return base * (1.0 - frac);
}

}  // namespace bxf
