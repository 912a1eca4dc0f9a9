// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bxf/autodiff.hpp"
#include "bxf/bits.hpp"
#include "bxf/tensor.hpp"

namespace bxf {

/// Smallest scale a channel may carry; all-zero channels are floored here.
inline constexpr double kAlphaFloor = 2.220446049250313e-16;

/// Per-channel MSE binarization of a d_in x d_out matrix: b_c = sign(w_c),
/// alpha_c = mean|w_c|, the closed-form minimizer of ||w_c - alpha b||^2.
BinaryLayer quantize_mse(const Tensor& w);

/// ||w - alpha b||^2 for one channel.
double binarization_error(std::span<const double> w, double alpha, std::span<const double> b);

struct AlphaGrid {
  double lo = 0.0;
  double hi = 1.0;
  double step = 1e-4;
};

struct BruteForceResult {
  double alpha = 0.0;
  std::vector<double> signs;
  double error = 0.0;
};

inline constexpr std::size_t kBruteForceMaxDim = 12;

/// Exhaustive minimizer over all 2^dim sign patterns and every point of the
/// alpha grid (default [0, 2 max|w|], step 1e-4). Refuses dim > 12.
BruteForceResult brute_force_quantize(std::span<const double> w,
                                      std::optional<AlphaGrid> grid = std::nullopt);

/// ||diag(s) V^T (w - w_q)||_F^2 + gamma ||w_q||_1, with V^T applied along
/// the input (row) axis of the matricized weights.
ad::Var bitat_distance(ad::Var w, ad::Var w_q, ad::Var s, ad::Var v, double gamma);

/// Convenience evaluation of bitat_distance on plain tensors.
double bitat_distance_value(const Tensor& w, const Tensor& w_q, const Tensor& s, const Tensor& v,
                            double gamma);

enum class AlphaPolicy { trained, recompute };

const char* alpha_policy_name(AlphaPolicy p) noexcept;
AlphaPolicy parse_alpha_policy(const std::string& name);

/// Packs sign(w). The scale is `trained_alpha` under the trained policy, or
/// mean|w_c| under the recompute policy.
BinaryLayer finalize(const Tensor& w, AlphaPolicy policy,
                     std::span<const double> trained_alpha = {});

}  // namespace bxf
