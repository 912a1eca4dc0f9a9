// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bxf/error.hpp"
#include "bxf/transform.hpp"
#include "gradcheck.hpp"

using namespace bxf;
using bxf::testing::random_tensor;

namespace {

Tensor gaussian_rows(std::size_t n, std::vector<double> stds, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 1);
  Tensor x = Tensor::matrix(n, stds.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < stds.size(); ++j) x(i, j) = stds[j] * g(rng);
  return x;
}

}  // namespace

TEST_CASE("pca of identity second moment") {
  // Rows +-e_j scaled so (1/N) X^T X = I exactly.
  Tensor x = Tensor::matrix(6, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    x(2 * j, j) = std::sqrt(3.0);
    x(2 * j + 1, j) = -std::sqrt(3.0);
  }
  PcaResult p = pca_init(x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(p.s[i] == doctest::Approx(1.0));
  // U is a permutation matrix.
  for (std::size_t c = 0; c < 3; ++c) {
    double mx = 0, sum = 0;
    for (std::size_t r = 0; r < 3; ++r) { mx = std::max(mx, p.U(r, c)); sum += std::abs(p.U(r, c)); }
    CHECK(mx == doctest::Approx(1.0));
    CHECK(sum == doctest::Approx(1.0));
  }
}

TEST_CASE("pca reconstruction, ordering, orthonormality, sign convention") {
  std::mt19937_64 rng(2);
  Tensor x = gaussian_rows(200, {3.0, 1.0, 0.5, 0.1, 2.0}, rng);
  PcaResult p = pca_init(x);
  const Tensor m = second_moment(x);
  Tensor rebuilt = Tensor::matrix(5, 5);
  for (std::size_t c = 0; c < 5; ++c)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) rebuilt(i, j) += p.U(i, c) * p.s[c] * p.s[c] * p.U(j, c);
  CHECK(max_abs_diff(rebuilt, m) <= 1e-8);
  for (std::size_t c = 1; c < 5; ++c) CHECK(p.eigenvalues[c - 1] >= p.eigenvalues[c]);
  for (double v : p.s.storage()) CHECK(v >= kScaleFloor);
  CHECK(orthogonality_deviation(transpose(p.U)) < 1e-8);
  for (std::size_t c = 0; c < 5; ++c) {
    std::size_t arg = 0;
    for (std::size_t r = 1; r < 5; ++r)
      if (std::abs(p.U(r, c)) > std::abs(p.U(arg, c))) arg = r;
    CHECK(p.U(arg, c) > 0);
  }
  CHECK_THROWS_AS(pca_init(Tensor::matrix(1, 3)), Error);
}

TEST_CASE("pca of rank-1 inputs") {
  Tensor x = Tensor::matrix(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    const double t = static_cast<double>(i) - 4.5;
    x(i, 0) = t;
    x(i, 1) = 2 * t;
  }
  PcaResult p = pca_init(x);
  CHECK(p.U(0, 0) == doctest::Approx(1 / std::sqrt(5.0)));
  CHECK(p.U(1, 0) == doctest::Approx(2 / std::sqrt(5.0)));
  CHECK(p.s[1] == kScaleFloor);
}

TEST_CASE("centered pca subtracts the mean") {
  Tensor x = Tensor::from_rows({{1, 5}, {3, 5}});
  CHECK(second_moment(x, true) == Tensor::from_rows({{1, 0}, {0, 0}}));
  CHECK(second_moment(x, false)(1, 1) == 25.0);
}

TEST_CASE("kmeans identity and duplicates") {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({20, 4}, rng);
  ReductionMatrix r = kmeans_group(x, 4, 1);
  CHECK(r.is_identity());
  CHECK(r.P == Tensor::identity(4));

  Tensor dup = random_tensor({30, 5}, rng);
  for (std::size_t i = 0; i < 30; ++i) dup(i, 4) = dup(i, 1);
  ReductionMatrix g = kmeans_group(dup, 4, 9);
  CHECK(g.groups[1] == g.groups[4]);
}

TEST_CASE("kmeans recovers separated bundles, matching exhaustive 2-clustering") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0, 1);
  const std::size_t N = 40;
  Tensor base_a = random_tensor({N}, rng, -1, 1), base_b = random_tensor({N}, rng, -1, 1);
  Tensor x = Tensor::matrix(N, 6);
  const std::vector<int> truth{0, 1, 0, 1, 1, 0};
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t i = 0; i < N; ++i)
      x(i, j) = (truth[j] == 0 ? 5.0 + base_a[i] : -5.0 + base_b[i]) + 0.05 * n(rng);

  // Oracle: every 2-partition of 6 columns, keep the least within-group SSE.
  double best = INFINITY;
  unsigned best_mask = 0;
  for (unsigned mask = 1; mask < 63; ++mask) {
    double sse = 0;
    for (int side = 0; side < 2; ++side) {
      std::vector<double> c(N, 0.0);
      int cnt = 0;
      for (std::size_t j = 0; j < 6; ++j)
        if (((mask >> j) & 1) == static_cast<unsigned>(side)) {
          ++cnt;
          for (std::size_t i = 0; i < N; ++i) c[i] += x(i, j);
        }
      for (double& v : c) v /= cnt;
      for (std::size_t j = 0; j < 6; ++j)
        if (((mask >> j) & 1) == static_cast<unsigned>(side))
          for (std::size_t i = 0; i < N; ++i) sse += (x(i, j) - c[i]) * (x(i, j) - c[i]);
    }
    if (sse < best) { best = sse; best_mask = mask; }
  }
  ReductionMatrix r = kmeans_group(x, 2, 11);
  for (std::size_t j = 0; j < 6; ++j)
    for (std::size_t l = 0; l < 6; ++l)
      CHECK((r.groups[j] == r.groups[l]) == (((best_mask >> j) & 1) == ((best_mask >> l) & 1)));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK((r.P(i, j) == 0.0 || r.P(i, j) == doctest::Approx(1.0 / 3.0)));
}

TEST_CASE("reduction matrix properties and determinism") {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({25, 30}, rng);
  ReductionMatrix a = kmeans_group(x, 7, 42);
  ReductionMatrix b = kmeans_group(x, 7, 42);
  CHECK(a.P == b.P);
  CHECK(a.groups == b.groups);
  for (std::size_t i = 0; i < a.k(); ++i) {
    double row = 0;
    for (std::size_t j = 0; j < a.d(); ++j) row += a.P(i, j);
    CHECK(std::abs(row - 1.0) <= 1e-12);
  }
  for (std::size_t j = 0; j < a.d(); ++j) {
    int nz = 0;
    for (std::size_t i = 0; i < a.k(); ++i) nz += a.P(i, j) != 0.0;
    CHECK(nz == 1);
  }
}

TEST_CASE("grouped covariance of duplicated features") {
  std::mt19937_64 rng(6);
  Tensor base = random_tensor({50, 3}, rng);
  Tensor dup = Tensor::matrix(50, 6);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 6; ++j) dup(i, j) = base(i, j % 3);
  ReductionMatrix r = kmeans_group(dup, 3, 1);
  Tensor grouped = r.apply(dup);
  // Group g collects the copies of some base column; recover which.
  Tensor expect = Tensor::matrix(50, 3);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t i = 0; i < 50; ++i) expect(i, r.groups[j]) = base(i, j);
  CHECK(max_abs_diff(second_moment(grouped), second_moment(expect)) <= 1e-14);
}

TEST_CASE("expand and stack bookkeeping") {
  std::mt19937_64 rng(7);
  PcaResult p1 = pca_init(random_tensor({20, 3}, rng));
  PcaResult p2 = pca_init(random_tensor({20, 2}, rng));
  BlockState s1 = expand(BlockState{}, 1, p1.s, p1.U, ReductionMatrix::identity(3));
  CHECK(s1.V == p1.U);
  CHECK(max_abs_diff(s1.s(), p1.s) < 1e-15);
  BlockState s2 = expand(s1, 2, p2.s, p2.U, ReductionMatrix::identity(2));
  CHECK(s2.side() == 5);
  CHECK(s2.offsets == std::vector<std::size_t>{0, 3, 5});
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s2.log_s[i] == s1.log_s[i]);
    for (std::size_t j = 0; j < 3; ++j) CHECK(s2.V(i, j) == s1.V(i, j));
  }
  CHECK(orthogonality_deviation(s2.V) < 1e-12);
  double sum = 0;
  for (double v : s2.log_s.storage()) sum += v;
  CHECK(s2.sigma0 == doctest::Approx(sum));
  CHECK_NOTHROW(s2.validate());

  Tensor a = random_tensor({2, 1}, rng), b = random_tensor({3, 2}, rng);
  CHECK(stack_weights(Tensor{}, b) == b);
  Tensor st = stack_weights(a, b);
  CHECK(st.rows() == 5);
  CHECK(st.cols() == 3);
  CHECK(st(0, 1) == 0.0);
  CHECK(st(0, 2) == 0.0);
  CHECK(st(2, 0) == 0.0);
  CHECK(st(3, 2) == b(1, 1));
  CHECK(std::sqrt(frobenius_sq(st)) == doctest::Approx(std::sqrt(frobenius_sq(a) + frobenius_sq(b))));
}

TEST_CASE("regularizer values") {
  Tensor s = Tensor::vector({0.5, 2.0, 1.5});
  double sigma0 = 0;
  for (double v : s.storage()) sigma0 += std::log(v);
  CHECK(regularizer_value(s, Tensor::identity(3), sigma0) == doctest::Approx(0.0));
  Tensor v2 = Tensor::identity(4);
  for (double& v : v2.storage()) v *= 2;
  CHECK(regularizer_value(Tensor::vector({1, 1, 1, 1}), v2, 0.0) == doctest::Approx(36.0));
  Tensor doubled = s;
  doubled[1] *= 2;
  CHECK(regularizer_value(doubled, Tensor::identity(3), sigma0) ==
        doctest::Approx(std::log(2.0) * std::log(2.0)));
  CHECK_THROWS_AS(regularizer_value(Tensor::vector({1, 0, 1}), Tensor::identity(3), 0), Error);

  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t)
    CHECK(regularizer_value(random_tensor({3}, rng, 0.1, 3), random_tensor({3, 3}, rng), 0.4) >= 0.0);
}

TEST_CASE("regularizer gradients match finite differences") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const double sigma0 = 0.3;
    std::vector<Tensor> in{random_tensor({4}, rng, 0.2, 2.0), random_tensor({4, 4}, rng)};
    CHECK(testing::gradient_error(
              [sigma0](ad::Tape&, const std::vector<ad::Var>& x) { return regularizer(x[0], x[1], sigma0); },
              in) < 1e-4);
    std::vector<Tensor> in_log{random_tensor({4}, rng), random_tensor({4, 4}, rng)};
    CHECK(testing::gradient_error(
              [sigma0](ad::Tape&, const std::vector<ad::Var>& x) { return regularizer_log(x[0], x[1], sigma0); },
              in_log) < 1e-4);
  }
}

TEST_CASE("apply_reduction") {
  std::mt19937_64 rng(10);
  PcaResult p = pca_init(random_tensor({20, 3}, rng));
  BlockState st = expand(BlockState{}, 1, p.s, p.U, ReductionMatrix::identity(3));
  ReducedTransform r = apply_reduction(st);
  CHECK(r.VtP == transpose(st.V));

  Tensor x = random_tensor({40, 8}, rng);
  ReductionMatrix red = kmeans_group(x, 4, 3);
  PcaResult pg = pca_init(red.apply(x));
  BlockState sr = expand(BlockState{}, 1, pg.s, pg.U, red);
  ReducedTransform rr = apply_reduction(sr);
  CHECK(rr.VtP.rows() == 4);
  CHECK(rr.VtP.cols() == 8);
  CHECK(max_abs_diff(rr.VtP, matmul(transpose(sr.V), red.P)) < 1e-15);
  // A 1024-wide layer grouped to 256 keeps a 256 x 256 transform.
  const double full = 1024.0 * 1024.0, reduced = 256.0 * 256.0;
  CHECK(reduced / full == 1.0 / 16.0);
}
