// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bxf/conv.hpp"
#include "bxf/tensor.hpp"

// Define-by-run reverse-mode differentiation. A Tape owns every node created
// during one training step; nodes are appended in topological order, so the
// backward sweep is a single reverse pass.
namespace bxf::ad {

enum class OpKind {
  leaf,
  matmul,
  transpose,
  add,
  sub,
  mul,
  scale,
  add_scalar,
  abs,
  log,
  exp,
  square,
  relu,
  sign_ste,
  sum,
  frobenius_sq,
  l1_norm,
  row_scale,
  col_scale,
  block_diag,
  softmax_xent,
  unfold,
  fold,
};

const char* op_name(OpKind kind) noexcept;

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  /// Gradient after backward(); a zero tensor when no path reached this node.
  Tensor grad() const;
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends an op node. `backward` is dropped when no input needs a gradient.
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
  void backward(Var loss);

  /// Adds `g` into the gradient of node `id` (no-op for constants).
  void accumulate(std::size_t id, const Tensor& g);

  const Node& node(std::size_t id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

// Elementwise family. Binary ops accept equal shapes, or one scalar operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var abs(Var a);
/// Domain error when any entry is <= 0.
Var log(Var a);
Var exp(Var a);
Var square(Var a);
Var relu(Var a);

/// Forward sign with sign(0) = +1. Backward uses the piecewise-polynomial
/// surrogate 2+2w on [-1,0), 2-2w on [0,1), 0 elsewhere.
Var sign_ste(Var a);
double sign_surrogate_derivative(double w) noexcept;
inline double sign_value(double w) noexcept { return w >= 0.0 ? 1.0 : -1.0; }

Var matmul(Var a, Var b);
Var transpose(Var a);

Var sum(Var a);
Var frobenius_sq(Var a);
/// Sum of |a_i|; subgradient sign(a_i) with 0 at a_i = 0.
Var l1_norm(Var a);

/// diag(s) * m for a length-rows vector s.
Var row_scale(Var s, Var m);
/// m * diag(c) for a length-cols vector c.
Var col_scale(Var m, Var c);
/// [[a, 0], [0, b]].
Var block_diag(Var a, Var b);

/// Mean softmax cross-entropy over the rows of `logits`.
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

Var unfold(Var batch, const ConvGeometry& geometry);
Var fold(Var rows, std::size_t positions);

}  // namespace bxf::ad
