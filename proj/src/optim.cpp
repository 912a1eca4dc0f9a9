// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/optim.hpp"

#include <cmath>

#include "bxf/error.hpp"

namespace bxf {

Adam::Adam(std::size_t slots, AdamOptions options) : opt_(options), m_(slots), v_(slots) {}

void Adam::update(std::size_t slot, Tensor& param, const Tensor& grad, double lr) {
  require(slot < m_.size(), ErrorCode::internal, "Adam slot out of range");
  require(grad.size() == param.size(), ErrorCode::dimension, "Adam gradient shape mismatch");
  Tensor& m = m_[slot];
  Tensor& v = v_[slot];
  if (m.empty()) {
    m = Tensor(param.shape(), 0.0);
    v = Tensor(param.shape(), 0.0);
  }
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(opt_.beta1, t);
  const double c2 = 1.0 - std::pow(opt_.beta2, t);
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * grad[i];
    v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * grad[i] * grad[i];
    param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt_.eps);
  }
}

}  // namespace bxf
