// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bxf/autodiff.hpp"
#include "bxf/tensor.hpp"

namespace bxf {

/// Group-averaging operator over input dimensions: P is k x d with
/// P[i][j] = 1/|group i| when dimension j belongs to group i.
struct ReductionMatrix {
  Tensor P;
  /// Group of each input dimension, in [0, k).
  std::vector<std::size_t> groups;

  std::size_t k() const noexcept { return P.rows(); }
  std::size_t d() const noexcept { return P.cols(); }
  bool is_identity() const;
  /// Rows o of `inputs` (N x d) mapped to P o (N x k).
  Tensor apply(const Tensor& inputs) const;
  void validate() const;

  static ReductionMatrix identity(std::size_t d);
  static ReductionMatrix from_groups(std::vector<std::size_t> groups, std::size_t k);
};

struct PcaResult {
  Tensor eigenvalues;  // descending
  Tensor s;            // sqrt(eigenvalues), floored at kScaleFloor
  Tensor U;            // columns are eigenvectors
};

inline constexpr double kScaleFloor = 1e-6;

/// Eigendecomposition of the second-moment matrix (1/N) sum o o^T of the
/// rows of `inputs` (covariance when `centered`). Each eigenvector has its
/// largest-magnitude entry positive.
PcaResult pca_init(const Tensor& inputs, bool centered = false);

/// Second-moment (or covariance) matrix of the rows of `inputs`.
Tensor second_moment(const Tensor& inputs, bool centered = false);

/// Clusters the d columns of `inputs` (each a point in R^N) into k groups
/// with k-means++ seeding and at most 100 Lloyd iterations. Identity when
/// d <= k.
ReductionMatrix kmeans_group(const Tensor& inputs, std::size_t k, std::uint64_t seed);

inline constexpr std::size_t kKmeansMaxIter = 100;

/// Shared (s, V) state of one block of consecutive layers. s is kept as
/// log s so it stays positive under gradient updates.
struct BlockState {
  std::vector<std::size_t> layers;
  Tensor log_s;
  Tensor V;
  std::vector<ReductionMatrix> reductions;
  /// Row offsets of each layer inside the transformed stack; size layers+1.
  std::vector<std::size_t> offsets{0};
  double sigma0 = 0.0;

  std::size_t side() const noexcept { return offsets.back(); }
  bool empty() const noexcept { return layers.empty(); }
  Tensor s() const;
  void validate() const;
};

/// Appends a layer: s <- [s; s_new], V <- [[V, 0], [0, U_new]], and resets
/// sigma0 to sum(log s) of the expanded vector.
BlockState expand(const BlockState& state, std::size_t layer, const Tensor& s_new,
                  const Tensor& U_new, ReductionMatrix reduction);

/// [[w_prev, 0], [0, w_new]]: w_prev padded right by w_new's columns,
/// w_new padded left by w_prev's columns.
Tensor stack_weights(const Tensor& w_prev, const Tensor& w_new);
ad::Var stack_weights(ad::Var w_prev, ad::Var w_new);

/// ||V V^T - I||_F^2 + (sigma0 - sum log s)^2. Domain error when s <= 0.
ad::Var regularizer(ad::Var s, ad::Var v, double sigma0);
/// Same with s given as log s.
ad::Var regularizer_log(ad::Var log_s, ad::Var v, double sigma0);
double regularizer_value(const Tensor& s, const Tensor& v, double sigma0);

double orthogonality_deviation(const Tensor& v);

/// Importance vector and V^T * blockdiag(P_j) for the block's distance term.
struct ReducedTransform {
  Tensor s;
  Tensor VtP;
};
ReducedTransform apply_reduction(const BlockState& state);

/// Writes s, V and group assignments as rows of (kind, layer, row, col, value).
void write_transform_csv(const BlockState& state, const std::string& path);

}  // namespace bxf
