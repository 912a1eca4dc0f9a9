// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include "bxf/tensor.hpp"

namespace bxf {

/// Geometry of a square-kernel 2-D convolution over a channel-major image.
/// Patch columns are ordered channel-major, then kernel-row-major.
struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h() const noexcept { return (in_h + 2 * padding - kernel) / stride + 1; }
  std::size_t out_w() const noexcept { return (in_w + 2 * padding - kernel) / stride + 1; }
  std::size_t positions() const noexcept { return out_h() * out_w(); }
  std::size_t patch_len() const noexcept { return in_channels * kernel * kernel; }
  std::size_t input_len() const noexcept { return in_channels * in_h * in_w; }
  std::size_t output_len() const noexcept { return out_channels * positions(); }

  /// Throws a dimension error when the kernel does not fit the padded image.
  void validate() const;

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

/// One image (n_in x H x W, channel-major) to a P x (n_in*k*k) patch matrix.
Tensor unfold_patches(const Tensor& image, std::size_t kernel, std::size_t stride,
                      std::size_t padding);

/// Batch version: B x input_len rows to (B*P) x patch_len, sample-major.
Tensor unfold_batch(const Tensor& batch, const ConvGeometry& g);

/// Adjoint of unfold_batch: scatter-adds patch gradients back into images.
Tensor unfold_batch_adjoint(const Tensor& patches, const ConvGeometry& g, std::size_t batch);

/// (B*P) x C_out rows to B x (C_out*P) channel-major feature maps.
Tensor fold_outputs(const Tensor& rows, std::size_t positions);
Tensor fold_outputs_adjoint(const Tensor& maps, std::size_t positions);

/// Per-patch validity mask: 1 where the patch entry lies inside the image,
/// 0 where it falls in zero padding. Shape P x patch_len.
Tensor patch_validity(const ConvGeometry& g);

/// Reference sliding-window convolution (weights out x in x k x k flattened).
Tensor direct_convolution(const Tensor& image, const Tensor& weights, const ConvGeometry& g);

}  // namespace bxf
