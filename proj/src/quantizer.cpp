// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bxf/error.hpp"

namespace bxf {

namespace {

std::vector<double> column(const Tensor& w, std::size_t c) {
  std::vector<double> col(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) col[r] = w(r, c);
  return col;
}

double mean_abs(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

BinaryLayer quantize_mse(const Tensor& w) {
  require(w.rank() == 2, ErrorCode::dimension, "quantize_mse expects a d_in x d_out matrix");
  w.validate("quantize_mse input");
  BinaryLayer out;
  out.d_in = w.rows();
  out.d_out = w.cols();
  out.bits = pack_signs(w);
  out.alpha.resize(out.d_out);
  for (std::size_t c = 0; c < out.d_out; ++c) {
    const double a = mean_abs(column(w, c));
    if (a < kAlphaFloor) {
      out.alpha[c] = kAlphaFloor;
      out.floored_channels.push_back(c);
    } else {
      out.alpha[c] = a;
    }
  }
  return out;
}

double binarization_error(std::span<const double> w, double alpha, std::span<const double> b) {
  require(w.size() == b.size(), ErrorCode::dimension, "binarization_error size mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double d = w[i] - alpha * b[i];
    e += d * d;
  }
  return e;
}

BruteForceResult brute_force_quantize(std::span<const double> w, std::optional<AlphaGrid> grid) {
  const std::size_t d = w.size();
  require(d >= 1, ErrorCode::argument, "brute_force_quantize needs a nonempty vector");
  require(d <= kBruteForceMaxDim, ErrorCode::argument,
          "brute_force_quantize refuses dim " + std::to_string(d) + " > " +
              std::to_string(kBruteForceMaxDim));
  AlphaGrid g;
  if (grid) {
    g = *grid;
  } else {
    double mx = 0.0;
    for (double x : w) mx = std::max(mx, std::abs(x));
    g = AlphaGrid{0.0, 2.0 * mx, 1e-4};
  }
  require(g.step > 0.0 && g.hi >= g.lo, ErrorCode::argument, "invalid alpha grid");
  const auto last = static_cast<std::size_t>(std::floor((g.hi - g.lo) / g.step));

  BruteForceResult best;
  best.error = std::numeric_limits<double>::infinity();
  std::vector<double> b(d);
  for (std::uint32_t mask = 0; mask < (1U << d); ++mask) {
    double c = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      b[i] = (mask >> i) & 1U ? 1.0 : -1.0;
      c += b[i] * w[i];
    }
    // Error along the grid is a convex quadratic in alpha, so its grid
    // minimum sits on one of the two grid points bracketing c/d.
    const double vertex = (c / static_cast<double>(d) - g.lo) / g.step;
    const double j0 = std::clamp(std::floor(vertex), 0.0, static_cast<double>(last));
    for (double j : {j0, std::min(j0 + 1.0, static_cast<double>(last))}) {
      const double alpha = g.lo + j * g.step;
      const double e = binarization_error(w, alpha, b);
      if (e < best.error) {
        best.error = e;
        best.alpha = alpha;
        best.signs = b;
      }
    }
  }
  return best;
}

ad::Var bitat_distance(ad::Var w, ad::Var w_q, ad::Var s, ad::Var v, double gamma) {
  const Tensor& wv = w.value();
  require(wv.same_shape(w_q.value()), ErrorCode::dimension,
          "bitat_distance: w " + wv.shape_string() + " vs w_q " + w_q.value().shape_string());
  const Tensor& vv = v.value();
  require(vv.rank() == 2 && vv.rows() == vv.cols() && vv.rows() == wv.rows(), ErrorCode::dimension,
          "bitat_distance: V " + vv.shape_string() + " must be square with side " +
              std::to_string(wv.rows()));
  require(s.value().size() == vv.rows(), ErrorCode::dimension,
          "bitat_distance: s has length " + std::to_string(s.value().size()));
  ad::Var transformed = ad::matmul(ad::transpose(v), ad::sub(w, w_q));
  ad::Var dist = ad::frobenius_sq(ad::row_scale(s, transformed));
  if (gamma == 0.0) return dist;
  return ad::add(dist, ad::scale(ad::l1_norm(w_q), gamma));
}

double bitat_distance_value(const Tensor& w, const Tensor& w_q, const Tensor& s, const Tensor& v,
                            double gamma) {
  ad::Tape tape;
  return bitat_distance(tape.constant(w), tape.constant(w_q), tape.constant(s), tape.constant(v),
                        gamma)
      .value()
      .item();
}

const char* alpha_policy_name(AlphaPolicy p) noexcept {
  return p == AlphaPolicy::trained ? "trained" : "recompute";
}

AlphaPolicy parse_alpha_policy(const std::string& name) {
  if (name == "trained") return AlphaPolicy::trained;
  if (name == "recompute") return AlphaPolicy::recompute;
  fail(ErrorCode::argument, "unknown alpha policy '" + name + "' (trained|recompute)");
}

BinaryLayer finalize(const Tensor& w, AlphaPolicy policy, std::span<const double> trained_alpha) {
  if (policy == AlphaPolicy::recompute) return quantize_mse(w);
  require(w.rank() == 2, ErrorCode::dimension, "finalize expects a matrix");
  require(trained_alpha.size() == w.cols(), ErrorCode::dimension,
          "finalize: trained alpha needs one entry per output channel");
  BinaryLayer out;
  out.d_in = w.rows();
  out.d_out = w.cols();
  out.bits = pack_signs(w);
  out.alpha.resize(out.d_out);
  for (std::size_t c = 0; c < out.d_out; ++c) {
    // A trained scale can drift through zero; the sign then moves into b.
    if (std::abs(trained_alpha[c]) < kAlphaFloor || !std::isfinite(trained_alpha[c])) {
      out.alpha[c] = kAlphaFloor;
      out.floored_channels.push_back(c);
    } else {
      out.alpha[c] = std::abs(trained_alpha[c]);
    }
  }
  return out;
}

}  // namespace bxf
