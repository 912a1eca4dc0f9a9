// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/conv.hpp"

#include "bxf/error.hpp"

namespace bxf {

void ConvGeometry::validate() const {
  require(kernel >= 1 && stride >= 1, ErrorCode::argument, "conv kernel and stride must be >= 1");
  require(in_channels >= 1 && out_channels >= 1, ErrorCode::argument, "conv needs channels");
  require(kernel <= in_h + 2 * padding && kernel <= in_w + 2 * padding, ErrorCode::dimension,
          "kernel " + std::to_string(kernel) + " larger than padded image " +
              std::to_string(in_h + 2 * padding) + "x" + std::to_string(in_w + 2 * padding));
}

namespace {

// Calls fn(patch_row, patch_col, source_index_or_npos) over every patch entry.
template <typename Fn>
void for_each_patch_entry(const ConvGeometry& g, Fn&& fn) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), k = g.kernel;
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      const std::size_t p = y * ow + x;
      std::size_t col = 0;
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          for (std::size_t kx = 0; kx < k; ++kx, ++col) {
            const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.padding);
            const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.padding);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) ||
                ix >= static_cast<long>(g.in_w)) {
              fn(p, col, static_cast<std::size_t>(-1));
            } else {
              fn(p, col, (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                             static_cast<std::size_t>(ix));
            }
          }
        }
      }
    }
  }
}

constexpr std::size_t kPadded = static_cast<std::size_t>(-1);

}  // namespace

Tensor unfold_patches(const Tensor& image, std::size_t kernel, std::size_t stride,
                      std::size_t padding) {
  require(image.rank() == 3, ErrorCode::dimension, "unfold_patches expects n_in x H x W");
  ConvGeometry g{image.shape()[0], image.shape()[1], image.shape()[2], 1, kernel, stride, padding};
  g.validate();
  Tensor flat({1, g.input_len()}, image.storage());
  return unfold_batch(flat, g);
}

Tensor unfold_batch(const Tensor& batch, const ConvGeometry& g) {
  g.validate();
  require(batch.cols() == g.input_len(), ErrorCode::dimension,
          "conv input width " + std::to_string(batch.cols()) + " != " +
              std::to_string(g.input_len()));
  const std::size_t n = batch.rows(), P = g.positions(), L = g.patch_len();
  Tensor out = Tensor::matrix(n * P, L);
  for (std::size_t b = 0; b < n; ++b) {
    const double* src = batch.data().data() + b * g.input_len();
    double* dst = out.data().data() + b * P * L;
    for_each_patch_entry(g, [&](std::size_t p, std::size_t col, std::size_t s) {
      dst[p * L + col] = s == kPadded ? 0.0 : src[s];
    });
  }
  return out;
}

Tensor unfold_batch_adjoint(const Tensor& patches, const ConvGeometry& g, std::size_t batch) {
  const std::size_t P = g.positions(), L = g.patch_len();
  require(patches.rows() == batch * P && patches.cols() == L, ErrorCode::dimension,
          "unfold adjoint shape mismatch");
  Tensor out = Tensor::matrix(batch, g.input_len());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = patches.data().data() + b * P * L;
    double* dst = out.data().data() + b * g.input_len();
    for_each_patch_entry(g, [&](std::size_t p, std::size_t col, std::size_t s) {
      if (s != kPadded) dst[s] += src[p * L + col];
    });
  }
  return out;
}

Tensor fold_outputs(const Tensor& rows, std::size_t positions) {
  require(positions > 0 && rows.rows() % positions == 0, ErrorCode::dimension,
          "fold_outputs row count not a multiple of positions");
  const std::size_t n = rows.rows() / positions, c = rows.cols();
  Tensor out = Tensor::matrix(n, c * positions);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t ch = 0; ch < c; ++ch)
        out(b, ch * positions + p) = rows(b * positions + p, ch);
  return out;
}

Tensor fold_outputs_adjoint(const Tensor& maps, std::size_t positions) {
  const std::size_t n = maps.rows(), c = maps.cols() / positions;
  Tensor out = Tensor::matrix(n * positions, c);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < positions; ++p)
      for (std::size_t ch = 0; ch < c; ++ch)
        out(b * positions + p, ch) = maps(b, ch * positions + p);
  return out;
}

Tensor patch_validity(const ConvGeometry& g) {
  Tensor mask = Tensor::matrix(g.positions(), g.patch_len());
  for_each_patch_entry(g, [&](std::size_t p, std::size_t col, std::size_t s) {
    mask(p, col) = s == kPadded ? 0.0 : 1.0;
  });
  return mask;
}

Tensor direct_convolution(const Tensor& image, const Tensor& weights, const ConvGeometry& g) {
  g.validate();
  const std::size_t k = g.kernel;
  require(weights.size() == g.out_channels * g.in_channels * k * k, ErrorCode::dimension,
          "direct_convolution weight size mismatch");
  Tensor out({g.out_channels, g.out_h(), g.out_w()});
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t y = 0; y < g.out_h(); ++y) {
      for (std::size_t x = 0; x < g.out_w(); ++x) {
        double acc = 0.0;
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.padding);
              const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.padding);
              if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.in_h) ||
                  ix >= static_cast<long>(g.in_w))
                continue;
              const double v = image[(c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                                     static_cast<std::size_t>(ix)];
              acc += v * weights[((o * g.in_channels + c) * k + ky) * k + kx];
            }
          }
        }
        out[(o * g.out_h() + y) * g.out_w() + x] = acc;
      }
    }
  }
  return out;
}

}  // namespace bxf
