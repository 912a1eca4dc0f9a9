// Copyright 2026 The binxform Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bxf/autodiff.hpp"
#include "bxf/error.hpp"
#include "bxf/tensor.hpp"
#include "gradcheck.hpp"

using namespace bxf;
using bxf::testing::gradient_error;
using bxf::testing::random_tensor;

namespace {

constexpr int kInstances = 20;
constexpr double kTol = 1e-4;

void check_op(const char* name, const testing::GraphFn& f,
              const std::function<std::vector<Tensor>(std::mt19937_64&)>& make) {
  std::mt19937_64 rng(std::hash<std::string>{}(name));
  for (int i = 0; i < kInstances; ++i) {
    const double err = gradient_error(f, make(rng));
    INFO(name << " instance " << i << " rel error " << err);
    CHECK(err < kTol);
  }
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor m = Tensor::from_rows({{1, 2}, {3, 4}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m(1, 0) == 3);
  CHECK(matmul(Tensor::identity(2), m) == m);
  CHECK(matmul(Tensor::from_rows({{1, 0}, {0, 0}}), Tensor::from_rows({{5}, {7}})) ==
        Tensor::from_rows({{5}, {0}}));
  CHECK(transpose(m) == Tensor::from_rows({{1, 3}, {2, 4}}));
  CHECK(Tensor::vector({1, 2, 3}).rows() == 3);
  CHECK_THROWS_AS(matmul(m, Tensor::matrix(3, 1)), Error);
  Tensor bad = Tensor::vector({1.0, NAN});
  CHECK_FALSE(bad.all_finite());
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("elementwise forward values") {
  ad::Tape t;
  CHECK(ad::abs(t.constant(Tensor::vector({-2, 3}))).value() == Tensor::vector({2, 3}));
  CHECK(ad::log(t.constant(Tensor::vector({1}))).value() == Tensor::vector({0}));
  CHECK(ad::frobenius_sq(t.constant(Tensor::from_rows({{3, 4}}))).value().item() == 25);
  CHECK(ad::frobenius_sq(t.constant(Tensor::matrix(3, 3))).value().item() == 0);
  CHECK(ad::l1_norm(t.constant(Tensor::vector({-1, 2}))).value().item() == 3);
  CHECK(ad::l1_norm(t.constant(Tensor::vector({0, 0}))).value().item() == 0);
  CHECK(ad::sign_ste(t.constant(Tensor::vector({-0.3, 0.0, 2.5}))).value() ==
        Tensor::vector({-1, 1, 1}));
  CHECK_THROWS_AS(ad::log(t.constant(Tensor::vector({1.0, 0.0}))), Error);
  try {
    ad::log(t.constant(Tensor::vector({-1.0})));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::domain);
  }
}

TEST_CASE("frobenius_sq equals direct summation") {
  std::mt19937_64 rng(5);
  Tensor a = random_tensor({4, 4}, rng);
  double s = 0.0;
  for (double v : a.storage()) s += v * v;
  ad::Tape t;
  CHECK(ad::frobenius_sq(t.constant(a)).value().item() == doctest::Approx(s).epsilon(1e-15));
}

TEST_CASE("sign surrogate derivative") {
  CHECK(ad::sign_surrogate_derivative(0.5) == 1.0);
  CHECK(ad::sign_surrogate_derivative(-0.5) == 1.0);
  CHECK(ad::sign_surrogate_derivative(0.0) == 2.0);
  CHECK(ad::sign_surrogate_derivative(3.0) == 0.0);
  CHECK(ad::sign_surrogate_derivative(-1.0) == 0.0);

  ad::Tape t;
  ad::Var w = t.leaf(Tensor::vector({-0.5, 0.25, 3.0, -2.0}), true);
  t.backward(ad::sum(ad::sign_ste(w)));
  CHECK(w.grad() == Tensor::vector({1.0, 1.5, 0.0, 0.0}));

  std::mt19937_64 rng(9);
  ad::Tape t2;
  Tensor r = random_tensor({50}, rng, -3, 3);
  r[7] = 0.0;
  for (double v : ad::sign_ste(t2.constant(r)).value().storage()) CHECK((v == 1.0 || v == -1.0));
}

TEST_CASE("finite-difference agreement per op") {
  for (const testing::OpCase& c : testing::autodiff_op_cases()) check_op(c.name, c.graph, c.make);
}

TEST_CASE("backward contract") {
  ad::Tape t;
  ad::Var w = t.leaf(Tensor::from_rows({{1, -2}, {3, 0.5}}), true);
  t.backward(ad::frobenius_sq(w));
  CHECK(w.grad() == Tensor::from_rows({{2, -4}, {6, 1}}));

  ad::Tape t2;
  ad::Var a = t2.leaf(Tensor::vector({1, 2}), true);
  CHECK_THROWS_AS(t2.backward(ad::scale(a, 2.0)), Error);
}

TEST_CASE("leaf feeding two consumers sums both paths") {
  std::mt19937_64 rng(3);
  Tensor x0 = random_tensor({3}, rng);
  Tensor b = random_tensor({3}, rng);
  ad::Tape t;
  ad::Var x = t.leaf(x0, true);
  t.backward(ad::add(ad::frobenius_sq(x), ad::sum(ad::mul(x, t.constant(b)))));
  Tensor g = x.grad();

  ad::Tape t1, t2;
  ad::Var x1 = t1.leaf(x0, true);
  t1.backward(ad::frobenius_sq(x1));
  ad::Var x2 = t2.leaf(x0, true);
  t2.backward(ad::sum(ad::mul(x2, t2.constant(b))));
  for (std::size_t i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(x1.grad()[i] + x2.grad()[i]));
}

TEST_CASE("graph evaluation is deterministic") {
  std::mt19937_64 rng(11);
  Tensor a = random_tensor({5, 4}, rng), b = random_tensor({4, 3}, rng);
  auto run = [&] {
    ad::Tape t;
    ad::Var x = t.leaf(a, true);
    ad::Var l = ad::softmax_cross_entropy(ad::matmul(x, t.constant(b)), std::vector<int>{0, 1, 2, 1, 0});
    t.backward(l);
    return std::make_pair(l.value(), x.grad());
  };
  const auto r1 = run();
  const auto r2 = run();
  CHECK(r1.first == r2.first);
  CHECK(r1.second == r2.second);
}

TEST_CASE("unreached leaf has zero gradient") {
  ad::Tape t;
  ad::Var a = t.leaf(Tensor::vector({1, 2}), true);
  ad::Var b = t.leaf(Tensor::vector({3, 4}), true);
  t.backward(ad::sum(a));
  CHECK(b.grad() == Tensor::vector({0, 0}));
}
