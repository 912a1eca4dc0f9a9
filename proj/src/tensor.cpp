// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#include "bxf/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "bxf/error.hpp"

namespace bxf {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == element_count(shape_), ErrorCode::dimension,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
              shape_string());
}

Tensor Tensor::scalar(double v) { return Tensor({}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
  return Tensor({rows, cols}, fill);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    require(row.size() == c, ErrorCode::dimension, "ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.empty()) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.size() < 2) return 1;
  return shape_[1];
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorCode::contract,
          "item() on tensor of shape " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Tensor::validate(const std::string& what) const {
  require(all_finite(), ErrorCode::numerical, what + " contains NaN or Inf");
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() <= 2 && b.rank() <= 2 && a.cols() == b.rows(), ErrorCode::dimension,
          "matmul shape mismatch " + a.shape_string() + " * " + b.shape_string());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c = Tensor::matrix(m, n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() <= 2, ErrorCode::dimension, "transpose needs rank <= 2");
  const std::size_t m = a.rows(), n = a.cols();
  Tensor t = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  return t;
}

double frobenius_sq(const Tensor& a) noexcept {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require(a.size() == b.size(), ErrorCode::dimension,
          "max_abs_diff size mismatch " + a.shape_string() + " vs " + b.shape_string());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require(begin <= end && end <= a.rows(), ErrorCode::dimension, "slice_rows out of range");
  const std::size_t c = a.cols();
  std::vector<double> data(a.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                           a.data().begin() + static_cast<std::ptrdiff_t>(end * c));
  return Tensor({end - begin, c}, std::move(data));
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t c = a.cols();
  Tensor out = Tensor::matrix(index.size(), c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] < a.rows(), ErrorCode::dimension, "gather_rows index out of range");
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(index[i] * c), c,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  return out;
}

}  // namespace bxf
