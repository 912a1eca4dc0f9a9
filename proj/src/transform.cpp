// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/transform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "bxf/error.hpp"
#include "bxf/rng.hpp"

namespace bxf {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> view(const Tensor& t) {
  return {t.storage().data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

}  // namespace

bool ReductionMatrix::is_identity() const {
  if (k() != d()) return false;
  for (std::size_t j = 0; j < groups.size(); ++j)
    if (groups[j] != j) return false;
  return true;
}

Tensor ReductionMatrix::apply(const Tensor& inputs) const {
  require(inputs.cols() == d(), ErrorCode::dimension,
          "reduction expects " + std::to_string(d()) + " input columns, got " +
              std::to_string(inputs.cols()));
  return matmul(inputs, transpose(P));
}

void ReductionMatrix::validate() const {
  require(P.rank() == 2 && groups.size() == d(), ErrorCode::contract, "malformed reduction matrix");
  std::vector<std::size_t> sizes(k(), 0);
  for (std::size_t g : groups) {
    require(g < k(), ErrorCode::contract, "group index out of range");
    ++sizes[g];
  }
  for (std::size_t i = 0; i < k(); ++i) {
    require(sizes[i] > 0, ErrorCode::contract, "empty group " + std::to_string(i));
    double row = 0.0;
    for (std::size_t j = 0; j < d(); ++j) row += P(i, j);
    require(std::abs(row - 1.0) <= 1e-12, ErrorCode::contract, "reduction row does not sum to 1");
  }
}

ReductionMatrix ReductionMatrix::identity(std::size_t d) {
  std::vector<std::size_t> g(d);
  std::iota(g.begin(), g.end(), 0);
  return from_groups(std::move(g), d);
}

ReductionMatrix ReductionMatrix::from_groups(std::vector<std::size_t> groups, std::size_t k) {
  ReductionMatrix r;
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t g : groups) {
    require(g < k, ErrorCode::argument, "group index out of range");
    ++sizes[g];
  }
  r.P = Tensor::matrix(k, groups.size());
  for (std::size_t j = 0; j < groups.size(); ++j)
    r.P(groups[j], j) = 1.0 / static_cast<double>(sizes[groups[j]]);
  r.groups = std::move(groups);
  r.validate();
  return r;
}

Tensor second_moment(const Tensor& inputs, bool centered) {
  require(inputs.rank() == 2 && inputs.rows() >= 2, ErrorCode::argument,
          "second moment needs at least 2 captured vectors");
  inputs.validate("layer inputs");
  RowMatrix x = view(inputs);
  if (centered) x.rowwise() -= x.colwise().mean();
  const RowMatrix m = (x.transpose() * x) / static_cast<double>(inputs.rows());
  Tensor out = Tensor::matrix(inputs.cols(), inputs.cols());
  Eigen::Map<RowMatrix>(out.storage().data(), m.rows(), m.cols()) = m;
  return out;
}

PcaResult pca_init(const Tensor& inputs, bool centered) {
  const Tensor m = second_moment(inputs, centered);
  const std::size_t d = m.rows();
  const RowMatrix mm = view(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mm);
  require(solver.info() == Eigen::Success, ErrorCode::numerical, "eigendecomposition failed");

  // Eigen returns ascending order; walk it backwards for descending.
  PcaResult r;
  r.eigenvalues = Tensor::vector(std::vector<double>(d));
  r.s = Tensor::vector(std::vector<double>(d));
  r.U = Tensor::matrix(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    const auto src = static_cast<Eigen::Index>(d - 1 - c);
    const double lambda = solver.eigenvalues()(src);
    r.eigenvalues[c] = lambda;
    r.s[c] = std::max(std::sqrt(std::max(lambda, 0.0)), kScaleFloor);
    Eigen::VectorXd u = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    for (Eigen::Index i = 1; i < u.size(); ++i)
      if (std::abs(u(i)) > std::abs(u(arg))) arg = i;
    if (u(arg) < 0) u = -u;
    for (std::size_t i = 0; i < d; ++i) r.U(i, c) = u(static_cast<Eigen::Index>(i));
  }

  RowMatrix rebuilt = RowMatrix::Zero(mm.rows(), mm.cols());
  const auto u = view(r.U);
  for (std::size_t c = 0; c < d; ++c)
    rebuilt += r.eigenvalues[c] * u.col(static_cast<Eigen::Index>(c)) *
               u.col(static_cast<Eigen::Index>(c)).transpose();
  const double err = (rebuilt - mm).cwiseAbs().maxCoeff();
  require(err <= 1e-8 * std::max(1.0, mm.cwiseAbs().maxCoeff()), ErrorCode::numerical,
          "PCA reconstruction error " + std::to_string(err));
  return r;
}

ReductionMatrix kmeans_group(const Tensor& inputs, std::size_t k, std::uint64_t seed) {
  require(k >= 1, ErrorCode::argument, "k-means needs k >= 1");
  require(inputs.rank() == 2 && inputs.rows() >= 1, ErrorCode::argument,
          "k-means needs a nonempty input matrix");
  const std::size_t d = inputs.cols();
  if (d <= k) return ReductionMatrix::identity(d);
  inputs.validate("k-means inputs");

  // Points are the columns of `inputs`.
  const RowMatrix pts = view(inputs).transpose();
  auto dist2 = [&](Eigen::Index j, const Eigen::RowVectorXd& c) { return (pts.row(j) - c).squaredNorm(); };

  Rng rng = make_rng(seed, "kmeans");
  RowMatrix centers(static_cast<Eigen::Index>(k), pts.cols());
  std::uniform_int_distribution<std::size_t> first(0, d - 1);
  centers.row(0) = pts.row(static_cast<Eigen::Index>(first(rng)));
  std::vector<double> nearest(d, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      nearest[j] = std::min(nearest[j], dist2(static_cast<Eigen::Index>(j), centers.row(static_cast<Eigen::Index>(c - 1))));
      total += nearest[j];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick + 1 < d; ++pick) {
        r -= nearest[pick];
        if (r < 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    centers.row(static_cast<Eigen::Index>(c)) = pts.row(static_cast<Eigen::Index>(pick));
  }

  std::vector<std::size_t> assign(d, 0);
  for (std::size_t iter = 0; iter < kKmeansMaxIter; ++iter) {
    bool changed = iter == 0;
    for (std::size_t j = 0; j < d; ++j) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = dist2(static_cast<Eigen::Index>(j), centers.row(static_cast<Eigen::Index>(c)));
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (assign[j] != best) changed = true;
      assign[j] = best;
    }
    // Repair empty clusters with the point farthest from its centroid.
    for (std::size_t c = 0; c < k; ++c) {
      if (std::count(assign.begin(), assign.end(), c) > 0) continue;
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t j = 0; j < d; ++j) {
        if (std::count(assign.begin(), assign.end(), assign[j]) < 2) continue;
        const double dd = dist2(static_cast<Eigen::Index>(j), centers.row(static_cast<Eigen::Index>(assign[j])));
        if (dd > fd) {
          fd = dd;
          far = j;
        }
      }
      assign[far] = c;
      changed = true;
    }
    centers.setZero();
    std::vector<std::size_t> count(k, 0);
    for (std::size_t j = 0; j < d; ++j) {
      centers.row(static_cast<Eigen::Index>(assign[j])) += pts.row(static_cast<Eigen::Index>(j));
      ++count[assign[j]];
    }
    for (std::size_t c = 0; c < k; ++c) centers.row(static_cast<Eigen::Index>(c)) /= static_cast<double>(count[c]);
    if (!changed) break;
  }

  // Relabel groups in order of their first member so P is canonical.
  std::vector<std::size_t> relabel(k, k);
  std::size_t next = 0;
  for (std::size_t& g : assign) {
    if (relabel[g] == k) relabel[g] = next++;
    g = relabel[g];
  }
  return ReductionMatrix::from_groups(std::move(assign), k);
}

Tensor BlockState::s() const {
  Tensor out = log_s;
  for (double& v : out.storage()) v = std::exp(v);
  return out;
}

void BlockState::validate() const {
  require(offsets.size() == layers.size() + 1 && reductions.size() == layers.size(),
          ErrorCode::contract, "block state bookkeeping out of sync");
  for (std::size_t i = 1; i < offsets.size(); ++i)
    require(offsets[i] > offsets[i - 1], ErrorCode::contract, "block offsets must increase");
  require(log_s.size() == side() && V.rows() == side() && V.cols() == side(), ErrorCode::contract,
          "block s/V sizes differ from the stacked dimension");
  for (const auto& r : reductions) r.validate();
}

BlockState expand(const BlockState& state, std::size_t layer, const Tensor& s_new,
                  const Tensor& U_new, ReductionMatrix reduction) {
  const std::size_t d = s_new.size();
  require(d > 0 && U_new.rank() == 2 && U_new.rows() == d && U_new.cols() == d,
          ErrorCode::dimension, "expand: U_new must be square with side |s_new|");
  require(reduction.k() == d, ErrorCode::dimension, "expand: reduction output differs from |s_new|");
  BlockState out;
  out.layers = state.layers;
  out.layers.push_back(layer);
  out.reductions = state.reductions;
  out.reductions.push_back(std::move(reduction));
  out.offsets = state.offsets;
  out.offsets.push_back(state.side() + d);

  const std::size_t n = state.side();
  std::vector<double> log_s(state.log_s.storage());
  for (double v : s_new.storage()) {
    require(v > 0.0, ErrorCode::domain, "expand: importance entries must be positive");
    log_s.push_back(std::log(v));
  }
  out.log_s = Tensor::vector(std::move(log_s));
  out.V = Tensor::matrix(n + d, n + d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.V(i, j) = state.V(i, j);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) out.V(n + i, n + j) = U_new(i, j);
  out.sigma0 = std::accumulate(out.log_s.storage().begin(), out.log_s.storage().end(), 0.0);
  return out;
}

Tensor stack_weights(const Tensor& w_prev, const Tensor& w_new) {
  if (w_prev.empty()) return w_new;
  Tensor out = Tensor::matrix(w_prev.rows() + w_new.rows(), w_prev.cols() + w_new.cols());
  for (std::size_t i = 0; i < w_prev.rows(); ++i)
    for (std::size_t j = 0; j < w_prev.cols(); ++j) out(i, j) = w_prev(i, j);
  for (std::size_t i = 0; i < w_new.rows(); ++i)
    for (std::size_t j = 0; j < w_new.cols(); ++j)
      out(w_prev.rows() + i, w_prev.cols() + j) = w_new(i, j);
  return out;
}

ad::Var stack_weights(ad::Var w_prev, ad::Var w_new) {
  if (!w_prev.valid() || w_prev.value().empty()) return w_new;
  return ad::block_diag(w_prev, w_new);
}

namespace {

ad::Var orthogonality_term(ad::Var v) {
  const std::size_t n = v.value().rows();
  ad::Var gram = ad::matmul(v, ad::transpose(v));
  return ad::frobenius_sq(ad::sub(gram, v.tape()->constant(Tensor::identity(n))));
}

}  // namespace

ad::Var regularizer(ad::Var s, ad::Var v, double sigma0) {
  return regularizer_log(ad::log(s), v, sigma0);
}

ad::Var regularizer_log(ad::Var log_s, ad::Var v, double sigma0) {
  const Tensor& vv = v.value();
  require(vv.rank() == 2 && vv.rows() == vv.cols() && log_s.value().size() == vv.rows(),
          ErrorCode::dimension, "regularizer: V must be square with side |s|");
  ad::Var drift = ad::add_scalar(ad::scale(ad::sum(log_s), -1.0), sigma0);
  return ad::add(orthogonality_term(v), ad::square(drift));
}

double regularizer_value(const Tensor& s, const Tensor& v, double sigma0) {
  ad::Tape tape;
  return regularizer(tape.constant(s), tape.constant(v), sigma0).value().item();
}

double orthogonality_deviation(const Tensor& v) {
  return std::sqrt(frobenius_sq([&] {
    Tensor g = matmul(v, transpose(v));
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
    return g;
  }()));
}

ReducedTransform apply_reduction(const BlockState& state) {
  state.validate();
  std::size_t total_d = 0;
  for (const auto& r : state.reductions) total_d += r.d();
  Tensor p = Tensor::matrix(state.side(), total_d);
  std::size_t col = 0;
  for (std::size_t j = 0; j < state.reductions.size(); ++j) {
    const Tensor& pj = state.reductions[j].P;
    for (std::size_t r = 0; r < pj.rows(); ++r)
      for (std::size_t c = 0; c < pj.cols(); ++c) p(state.offsets[j] + r, col + c) = pj(r, c);
    col += pj.cols();
  }
  return {state.s(), matmul(transpose(state.V), p)};
}

void write_transform_csv(const BlockState& state, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot write " + path);
  out.precision(17);
  out << "kind,layer,row,col,value\n";
  for (std::size_t j = 0; j < state.layers.size(); ++j) {
    const std::size_t layer = state.layers[j];
    for (std::size_t i = state.offsets[j]; i < state.offsets[j + 1]; ++i) {
      out << "s," << layer << ',' << i << ",0," << std::exp(state.log_s[i]) << '\n';
      for (std::size_t c = 0; c < state.side(); ++c)
        out << "V," << layer << ',' << i << ',' << c << ',' << state.V(i, c) << '\n';
    }
    const auto& g = state.reductions[j].groups;
    for (std::size_t c = 0; c < g.size(); ++c)
      out << "group," << layer << ',' << c << ",0," << g[c] << '\n';
  }
  require(out.good(), ErrorCode::io, "write failed for " + path);
}

}  // namespace bxf
