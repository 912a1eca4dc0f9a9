// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bxf/tensor.hpp"

namespace bxf {

enum class Split { all, train, test };

const char* split_name(Split s) noexcept;

struct Dataset {
  Tensor features;  // N x d
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Split split = Split::all;
  /// synthetic-gaussians, synthetic-moons, csv or idx.
  std::string provenance;
  /// Channel, height, width when the features are flattened images.
  std::vector<std::size_t> image_shape;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// No NaN, labels in range, one label per row.
  void validate() const;
  Dataset subset(std::span<const std::size_t> index) const;
};

struct GaussianSpec {
  std::size_t n = 1000;
  std::size_t dim = 16;
  std::size_t classes = 4;
  /// Leading dimensions that carry the class signal.
  std::size_t informative = 6;
  double separation = 2.0;
  double noise = 1.0;
  /// Standard deviation of the remaining low-variance dimensions.
  double low_std = 0.01;
};

struct MoonsSpec {
  std::size_t n = 1000;
  double noise = 0.1;
};

Dataset make_gaussians(const GaussianSpec& spec, std::uint64_t seed);
Dataset make_moons(const MoonsSpec& spec, std::uint64_t seed);

/// Header line plus numeric rows; the last column is an integer label.
Dataset load_csv(const std::string& path);

/// IDX image file (magic 0x0000080x, any rank >= 1) plus IDX label file
/// (u8 vector). Pixel values are scaled by 1/255 for u8 data.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Raw IDX tensor (all element types widened to fp64).
struct IdxArray {
  std::uint8_t type_code = 0;
  std::vector<std::size_t> dims;
  std::vector<double> values;
};
IdxArray read_idx(const std::string& path);

/// `spec` is one of
///   synthetic-gaussians[:key=value,...]   (n, dim, classes, informative, separation, noise, low_std)
///   synthetic-moons[:key=value,...]       (n, noise)
///   csv:<path> or a path ending in .csv
///   idx:<images>,<labels>
Dataset load_dataset(const std::string& spec, std::uint64_t seed);

/// Shuffled disjoint split; `train_fraction` of rows go to the first part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction,
                                          std::uint64_t seed);

}  // namespace bxf
