// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major linear algebra, activations, initializers and seeded
// randomness. Vectors are rows (1 x n) and stored as std::vector<double>.
//
// The matrix kernels come in two flavours: the functions in namespace
// optm::serial are the plain reference loops, and the unqualified versions
// split rows across OpenMP threads once the matrix is large enough to pay
// for the fork. Each output element is reduced in the same order by both,
// so the two agree bit for bit.
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace optm {

using Vec = std::vector<double>;

class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  void fill(double v);
  std::string shape_str() const;

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Element count (rows * cols) at and above which the unqualified kernels
/// run in parallel.
inline constexpr std::size_t kParallelThreshold = 1 << 14;

namespace serial {
Vec matvec(const Mat& m, std::span<const double> v);
/// mᵀ · v
Vec matvec_t(const Mat& m, std::span<const double> v);
/// acc += a ⊗ b (outer product, a indexes rows)
void outer_acc(Mat& acc, std::span<const double> a, std::span<const double> b);
}  // namespace serial

Vec matvec(const Mat& m, std::span<const double> v);
Vec matvec_t(const Mat& m, std::span<const double> v);
void outer_acc(Mat& acc, std::span<const double> a, std::span<const double> b);

Vec hadamard(std::span<const double> a, std::span<const double> b);
Vec add(std::span<const double> a, std::span<const double> b);
void add_inplace(std::span<double> acc, std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);

/// Stays strictly inside (0, 1) even where the exact value rounds to 0 or 1;
/// tanh likewise stays inside (-1, 1).
double sigmoid(double x);
Vec sigmoid(std::span<const double> v);
Vec tanh(std::span<const double> v);

bool all_finite(std::span<const double> v);

/// Deterministic pseudo-random source. Identical seeds give identical draw
/// sequences on the same standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  bool coin();

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Glorot-uniform matrix: entries drawn from U(-l, l), l = sqrt(6 / (rows + cols)).
Mat glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace optm
