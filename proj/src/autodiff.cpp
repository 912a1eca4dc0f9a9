// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "bxf/error.hpp"

namespace bxf::ad {

const char* op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::transpose: return "transpose";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::add_scalar: return "add_scalar";
    case OpKind::abs: return "abs";
    case OpKind::log: return "log";
    case OpKind::exp: return "exp";
    case OpKind::square: return "square";
    case OpKind::relu: return "relu";
    case OpKind::sign_ste: return "sign_ste";
    case OpKind::sum: return "sum";
    case OpKind::frobenius_sq: return "frobenius_sq";
    case OpKind::l1_norm: return "l1_norm";
    case OpKind::row_scale: return "row_scale";
    case OpKind::col_scale: return "col_scale";
    case OpKind::block_diag: return "block_diag";
    case OpKind::softmax_xent: return "softmax_xent";
    case OpKind::unfold: return "unfold";
    case OpKind::fold: return "fold";
  }
  return "?";
}

const Tensor& Var::value() const {
  require(tape_ != nullptr, ErrorCode::contract, "value() on unbound Var");
  return tape_->node(id_).value;
}

Tensor Var::grad() const {
  require(tape_ != nullptr, ErrorCode::contract, "grad() on unbound Var");
  const auto& n = tape_->node(id_);
  if (n.grad.empty() && !n.value.empty()) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->node(id_).requires_grad; }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.kind = kind;
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                [&](std::size_t i) { return nodes_[i].requires_grad; });
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  require(n.grad.size() == g.size(), ErrorCode::internal,
          std::string("gradient size mismatch at ") + op_name(n.kind));
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  require(loss.tape() == this, ErrorCode::contract, "backward on a Var from another tape");
  require(nodes_[loss.id()].value.size() == 1, ErrorCode::contract,
          "backward needs a scalar root, got shape " + nodes_[loss.id()].value.shape_string());
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Tensor(nodes_[loss.id()].value.shape(), 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    // Inputs always precede their consumer, so this node's grad is final.
    n.backward(*this, n.grad);
  }
}

namespace {

Tape& tape_of(Var a) {
  require(a.valid(), ErrorCode::contract, "operation on unbound Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  require(a.valid() && b.valid() && a.tape() == b.tape(), ErrorCode::contract,
          "operands belong to different tapes");
  return *a.tape();
}

enum class Broadcast { same, left_scalar, right_scalar };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.same_shape(b)) return Broadcast::same;
  if (a.size() == 1) return Broadcast::left_scalar;
  if (b.size() == 1) return Broadcast::right_scalar;
  fail(ErrorCode::dimension, std::string(op) + ": incompatible shapes " + a.shape_string() +
                                 " and " + b.shape_string());
}

template <typename Fn>
Tensor zip(const Tensor& a, const Tensor& b, Broadcast mode, Fn&& fn) {
  const Tensor& shape_src = mode == Broadcast::left_scalar ? b : a;
  Tensor out(shape_src.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = mode == Broadcast::left_scalar ? a[0] : a[i];
    const double y = mode == Broadcast::right_scalar ? b[0] : b[i];
    out[i] = fn(x, y);
  }
  return out;
}

// Reduces a full-shape gradient to the operand's shape (sum for scalars).
Tensor reduce_to(const Tensor& g, const Tensor& like) {
  if (like.size() == g.size()) return Tensor(like.shape(), g.storage());
  double s = 0.0;
  for (double v : g.data()) s += v;
  return Tensor(like.shape(), std::vector<double>{s});
}

template <typename Fwd, typename Deriv>
Var unary(Var a, OpKind kind, Fwd&& fwd, Deriv&& deriv) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  const std::size_t ia = a.id();
  return t.record(kind, {ia}, std::move(out),
                  [ia, deriv](Tape& tp, const Tensor& g) {
                    const Tensor& xv = tp.node(ia).value;
                    Tensor d(xv.shape());
                    for (std::size_t i = 0; i < xv.size(); ++i) d[i] = g[i] * deriv(xv[i]);
                    tp.accumulate(ia, d);
                  });
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const auto mode = broadcast_mode(a.value(), b.value(), "add");
  Tensor out = zip(a.value(), b.value(), mode, [](double x, double y) { return x + y; });
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::add, {ia, ib}, std::move(out), [ia, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, reduce_to(g, tp.node(ia).value));
    tp.accumulate(ib, reduce_to(g, tp.node(ib).value));
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const auto mode = broadcast_mode(a.value(), b.value(), "sub");
  Tensor out = zip(a.value(), b.value(), mode, [](double x, double y) { return x - y; });
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::sub, {ia, ib}, std::move(out), [ia, ib](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, reduce_to(g, tp.node(ia).value));
    Tensor neg = g;
    for (double& v : neg.storage()) v = -v;
    tp.accumulate(ib, reduce_to(neg, tp.node(ib).value));
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const auto mode = broadcast_mode(a.value(), b.value(), "mul");
  Tensor out = zip(a.value(), b.value(), mode, [](double x, double y) { return x * y; });
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::mul, {ia, ib}, std::move(out),
                  [ia, ib, mode](Tape& tp, const Tensor& g) {
                    const Tensor& av = tp.node(ia).value;
                    const Tensor& bv = tp.node(ib).value;
                    Tensor ga(g.shape()), gb(g.shape());
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      const double x = mode == Broadcast::left_scalar ? av[0] : av[i];
                      const double y = mode == Broadcast::right_scalar ? bv[0] : bv[i];
                      ga[i] = g[i] * y;
                      gb[i] = g[i] * x;
                    }
                    tp.accumulate(ia, reduce_to(ga, av));
                    tp.accumulate(ib, reduce_to(gb, bv));
                  });
}

Var scale(Var a, double factor) {
  return unary(
      a, OpKind::scale, [factor](double x) { return factor * x; },
      [factor](double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(
      a, OpKind::add_scalar, [offset](double x) { return x + offset; },
      [](double) { return 1.0; });
}

Var abs(Var a) {
  return unary(
      a, OpKind::abs, [](double x) { return std::abs(x); },
      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var log(Var a) {
  for (double v : a.value().data())
    require(v > 0.0, ErrorCode::domain, "log of non-positive value " + std::to_string(v));
  return unary(
      a, OpKind::log, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(
      a, OpKind::exp, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var square(Var a) {
  return unary(
      a, OpKind::square, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var relu(Var a) {
  return unary(
      a, OpKind::relu, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

double sign_surrogate_derivative(double w) noexcept {
  if (w >= -1.0 && w < 0.0) return 2.0 + 2.0 * w;
  if (w >= 0.0 && w < 1.0) return 2.0 - 2.0 * w;
  return 0.0;
}

Var sign_ste(Var a) {
  return unary(a, OpKind::sign_ste, sign_value, sign_surrogate_derivative);
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  Tensor out = bxf::matmul(a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::matmul, {ia, ib}, std::move(out), [ia, ib](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.node(ia).value;
    const Tensor& bv = tp.node(ib).value;
    Tensor gm({av.rows(), bv.cols()}, g.storage());
    if (tp.node(ia).requires_grad) {
      Tensor ga = bxf::matmul(gm, bxf::transpose(bv));
      tp.accumulate(ia, ga);
    }
    if (tp.node(ib).requires_grad) {
      Tensor gb = bxf::matmul(bxf::transpose(av), gm);
      tp.accumulate(ib, gb);
    }
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  return t.record(OpKind::transpose, {ia}, bxf::transpose(a.value()),
                  [ia](Tape& tp, const Tensor& g) {
                    const Tensor& av = tp.node(ia).value;
                    Tensor gm({av.cols(), av.rows()}, g.storage());
                    Tensor back = bxf::transpose(gm);
                    tp.accumulate(ia, Tensor(av.shape(), back.storage()));
                  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return t.record(OpKind::sum, {ia}, Tensor::scalar(s), [ia](Tape& tp, const Tensor& g) {
    tp.accumulate(ia, Tensor(tp.node(ia).value.shape(), g[0]));
  });
}

Var frobenius_sq(Var a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  return t.record(OpKind::frobenius_sq, {ia}, Tensor::scalar(bxf::frobenius_sq(a.value())),
                  [ia](Tape& tp, const Tensor& g) {
                    const Tensor& av = tp.node(ia).value;
                    Tensor d(av.shape());
                    for (std::size_t i = 0; i < av.size(); ++i) d[i] = 2.0 * av[i] * g[0];
                    tp.accumulate(ia, d);
                  });
}

Var l1_norm(Var a) {
  Tape& t = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += std::abs(v);
  const std::size_t ia = a.id();
  return t.record(OpKind::l1_norm, {ia}, Tensor::scalar(s), [ia](Tape& tp, const Tensor& g) {
    const Tensor& av = tp.node(ia).value;
    Tensor d(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i)
      d[i] = g[0] * (av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0));
    tp.accumulate(ia, d);
  });
}

Var row_scale(Var s, Var m) {
  Tape& t = tape_of(s, m);
  const Tensor& sv = s.value();
  const Tensor& mv = m.value();
  require(mv.rank() == 2 && sv.size() == mv.rows(), ErrorCode::dimension,
          "row_scale: vector " + sv.shape_string() + " vs matrix " + mv.shape_string());
  Tensor out = mv;
  for (std::size_t i = 0; i < mv.rows(); ++i)
    for (std::size_t j = 0; j < mv.cols(); ++j) out(i, j) *= sv[i];
  const std::size_t is = s.id(), im = m.id();
  return t.record(OpKind::row_scale, {is, im}, std::move(out),
                  [is, im](Tape& tp, const Tensor& g) {
                    const Tensor& sv2 = tp.node(is).value;
                    const Tensor& mv2 = tp.node(im).value;
                    const std::size_t r = mv2.rows(), c = mv2.cols();
                    Tensor gs(sv2.shape()), gm(mv2.shape());
                    for (std::size_t i = 0; i < r; ++i) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < c; ++j) {
                        acc += g[i * c + j] * mv2(i, j);
                        gm(i, j) = g[i * c + j] * sv2[i];
                      }
                      gs[i] = acc;
                    }
                    tp.accumulate(is, gs);
                    tp.accumulate(im, gm);
                  });
}

Var col_scale(Var m, Var c) {
  Tape& t = tape_of(m, c);
  const Tensor& mv = m.value();
  const Tensor& cv = c.value();
  require(mv.rank() == 2 && cv.size() == mv.cols(), ErrorCode::dimension,
          "col_scale: matrix " + mv.shape_string() + " vs vector " + cv.shape_string());
  Tensor out = mv;
  for (std::size_t i = 0; i < mv.rows(); ++i)
    for (std::size_t j = 0; j < mv.cols(); ++j) out(i, j) *= cv[j];
  const std::size_t im = m.id(), ic = c.id();
  return t.record(OpKind::col_scale, {im, ic}, std::move(out),
                  [im, ic](Tape& tp, const Tensor& g) {
                    const Tensor& mv2 = tp.node(im).value;
                    const Tensor& cv2 = tp.node(ic).value;
                    const std::size_t r = mv2.rows(), cc = mv2.cols();
                    Tensor gm(mv2.shape()), gc(cv2.shape());
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < cc; ++j) {
                        gm(i, j) = g[i * cc + j] * cv2[j];
                        gc[j] += g[i * cc + j] * mv2(i, j);
                      }
                    tp.accumulate(im, gm);
                    tp.accumulate(ic, gc);
                  });
}

Var block_diag(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t ra = av.rows(), ca = av.cols(), rb = bv.rows(), cb = bv.cols();
  Tensor out = Tensor::matrix(ra + rb, ca + cb);
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < ca; ++j) out(i, j) = av(i, j);
  for (std::size_t i = 0; i < rb; ++i)
    for (std::size_t j = 0; j < cb; ++j) out(ra + i, ca + j) = bv(i, j);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(OpKind::block_diag, {ia, ib}, std::move(out),
                  [ia, ib, ra, ca, rb, cb](Tape& tp, const Tensor& g) {
                    const std::size_t w = ca + cb;
                    Tensor ga(tp.node(ia).value.shape()), gb(tp.node(ib).value.shape());
                    for (std::size_t i = 0; i < ra; ++i)
                      for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] = g[i * w + j];
                    for (std::size_t i = 0; i < rb; ++i)
                      for (std::size_t j = 0; j < cb; ++j)
                        gb[i * cb + j] = g[(ra + i) * w + ca + j];
                    tp.accumulate(ia, ga);
                    tp.accumulate(ib, gb);
                  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  Tape& t = tape_of(logits);
  const Tensor& z = logits.value();
  const std::size_t n = z.rows(), c = z.cols();
  require(z.rank() == 2 && labels.size() == n && n > 0, ErrorCode::dimension,
          "softmax_cross_entropy: logits " + z.shape_string() + " vs " +
              std::to_string(labels.size()) + " labels");
  Tensor probs = Tensor::matrix(n, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < c, ErrorCode::argument,
            "label out of range: " + std::to_string(y));
    double mx = z(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, z(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(z(i, j) - mx);
    for (std::size_t j = 0; j < c; ++j) probs(i, j) = std::exp(z(i, j) - mx) / denom;
    loss += std::log(denom) + mx - z(i, static_cast<std::size_t>(y));
  }
  loss /= static_cast<double>(n);
  std::vector<int> ys(labels.begin(), labels.end());
  const std::size_t iz = logits.id();
  return t.record(OpKind::softmax_xent, {iz}, Tensor::scalar(loss),
                  [iz, probs = std::move(probs), ys = std::move(ys)](Tape& tp, const Tensor& g) {
                    Tensor d = probs;
                    const std::size_t rows = d.rows();
                    for (std::size_t i = 0; i < rows; ++i) d(i, static_cast<std::size_t>(ys[i])) -= 1.0;
                    const double f = g[0] / static_cast<double>(rows);
                    for (double& v : d.storage()) v *= f;
                    tp.accumulate(iz, d);
                  });
}

Var unfold(Var batch, const ConvGeometry& geometry) {
  Tape& t = tape_of(batch);
  const std::size_t ib = batch.id();
  const std::size_t n = batch.value().rows();
  return t.record(OpKind::unfold, {ib}, unfold_batch(batch.value(), geometry),
                  [ib, geometry, n](Tape& tp, const Tensor& g) {
                    Tensor gm({n * geometry.positions(), geometry.patch_len()}, g.storage());
                    tp.accumulate(ib, unfold_batch_adjoint(gm, geometry, n));
                  });
}

Var fold(Var rows, std::size_t positions) {
  Tape& t = tape_of(rows);
  const std::size_t ir = rows.id();
  const std::size_t c = rows.value().cols();
  return t.record(OpKind::fold, {ir}, fold_outputs(rows.value(), positions),
                  [ir, positions, c](Tape& tp, const Tensor& g) {
                    const std::size_t n = g.size() / (c * positions);
                    Tensor gm({n, c * positions}, g.storage());
                    tp.accumulate(ir, fold_outputs_adjoint(gm, positions));
                  });
}

}  // namespace bxf::ad
