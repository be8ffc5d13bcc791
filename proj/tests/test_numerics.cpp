// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "optm/error.hpp"
#include "optm/numerics.hpp"

using namespace optm;

TEST_CASE("matvec small cases") {
  CHECK(matvec(Mat::identity(2), Vec{3, -1}) == Vec{3, -1});
  CHECK(matvec(Mat(2, 2, {1, 2, 3, 4}), Vec{1, 1}) == Vec{3, 7});
  CHECK(matvec(Mat(3, 2), Vec{5, -2}) == Vec{0, 0, 0});
  CHECK(matvec_t(Mat(2, 2, {1, 2, 3, 4}), Vec{1, 1}) == Vec{4, 6});
}

TEST_CASE("shape errors name both shapes") {
  try {
    matvec(Mat(2, 3), Vec{1, 2});
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }
  CHECK_THROWS_AS(hadamard(Vec{1}, Vec{1, 2}), ShapeError);
  CHECK_THROWS_AS(Mat(2, 2, Vec{1, 2, 3}), ShapeError);
}

TEST_CASE("hadamard") {
  CHECK(hadamard(Vec{1, 2}, Vec{3, 4}) == Vec{3, 8});
  const Vec a{0.5, -7, 3.25};
  CHECK(hadamard(a, Vec(3, 1.0)) == a);
  CHECK(hadamard(a, Vec(3, 0.0)) == Vec{0, -0.0, 0});
}

TEST_CASE("sigmoid and tanh closed forms") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(optm::tanh(Vec{0.0})[0] == 0.0);
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(sigmoid(800.0) < 1.0);
  CHECK(sigmoid(800.0) == std::nextafter(1.0, 0.0));
  CHECK(sigmoid(-800.0) > 0.0);
  CHECK(optm::tanh(Vec{-50.0})[0] > -1.0);
}

TEST_CASE("sigmoid and tanh ranges and monotonicity on sorted samples") {
  Rng rng(3);
  Vec xs(2000);
  for (auto& x : xs) x = rng.uniform(-30, 30);
  std::sort(xs.begin(), xs.end());
  const Vec s = sigmoid(xs);
  const Vec t = optm::tanh(xs);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    CHECK(s[k] > 0.0);
    CHECK(s[k] < 1.0);
    CHECK(t[k] > -1.0);
    CHECK(t[k] < 1.0);
    if (k > 0) {
      CHECK(s[k] >= s[k - 1]);
      CHECK(t[k] >= t[k - 1]);
    }
  }
}

TEST_CASE("identity and zero matrices over random vectors") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 12));
    Vec v(n);
    for (auto& x : v) x = rng.normal(0, 10);
    CHECK(matvec(Mat::identity(n), v) == v);
    CHECK(matvec(Mat(n + 1, n), v) == Vec(n + 1, 0.0));
  }
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  Rng rng(5);
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{3, 4}, {200, 150}, {512, 64}}) {
    Mat m(rows, cols);
    for (auto& x : m.flat()) x = rng.normal(0, 1);
    Vec v(cols), u(rows);
    for (auto& x : v) x = rng.normal(0, 1);
    for (auto& x : u) x = rng.normal(0, 1);
    CHECK(matvec(m, v) == serial::matvec(m, v));
    CHECK(matvec_t(m, u) == serial::matvec_t(m, u));
    Mat a(rows, cols, 0.5), b(rows, cols, 0.5);
    outer_acc(a, u, v);
    serial::outer_acc(b, u, v);
    CHECK(a == b);
  }
}

TEST_CASE("glorot_init") {
  Rng a(42), b(42);
  CHECK(glorot_init(1, 1, a) == glorot_init(1, 1, b));
  CHECK(glorot_init(7, 5, a) == glorot_init(7, 5, b));

  Rng rng(1);
  const Mat m = glorot_init(2, 3, rng);
  for (double x : m.flat()) CHECK(std::abs(x) <= std::sqrt(6.0 / 5.0));

  const Mat big = glorot_init(1, 100000, rng);
  double mean = 0.0;
  for (double x : big.flat()) mean += x;
  mean /= 1e5;
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("rng determinism") {
  Rng a(9), b(9);
  for (int k = 0; k < 100; ++k) {
    CHECK(a.normal(0, 1) == b.normal(0, 1));
    CHECK(a.uniform_int(0, 1000) == b.uniform_int(0, 1000));
  }
}
