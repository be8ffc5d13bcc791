// SPDX-License-Identifier: Apache-2.0
#include "optm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "optm/error.hpp"

namespace optm {

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Mat: " + std::to_string(data_.size()) +
                     " values do not fill a " + shape_str() + " matrix");
  }
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Mat::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Mat::shape_str() const {
  std::ostringstream os;
  os << rows_ << "x" << cols_;
  return os.str();
}

namespace {

void check_matvec(const Mat& m, std::size_t n, const char* op) {
  if (n != m.cols()) {
    throw ShapeError(std::string(op) + ": matrix " + m.shape_str() +
                     " cannot multiply vector of length " + std::to_string(n));
  }
}

void check_matvec_t(const Mat& m, std::size_t n) {
  if (n != m.rows()) {
    throw ShapeError("matvec_t: transposed matrix " + m.shape_str() +
                     " cannot multiply vector of length " + std::to_string(n));
  }
}

void check_outer(const Mat& acc, std::size_t a, std::size_t b) {
  if (a != acc.rows() || b != acc.cols()) {
    throw ShapeError("outer_acc: " + std::to_string(a) + "x" + std::to_string(b) +
                     " outer product does not match accumulator " + acc.shape_str());
  }
}

void check_same(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": length " + std::to_string(a) +
                     " vs " + std::to_string(b));
  }
}

double row_dot(std::span<const double> row, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * v[j];
  return s;
}

}  // namespace

namespace serial {

Vec matvec(const Mat& m, std::span<const double> v) {
  check_matvec(m, v.size(), "matvec");
  Vec out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = row_dot(m.row(i), v);
  return out;
}

Vec matvec_t(const Mat& m, std::span<const double> v) {
  check_matvec_t(m, v.size());
  Vec out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += r[j] * v[i];
  }
  return out;
}

void outer_acc(Mat& acc, std::span<const double> a, std::span<const double> b) {
  check_outer(acc, a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto r = acc.row(i);
    for (std::size_t j = 0; j < b.size(); ++j) r[j] += a[i] * b[j];
  }
}

}  // namespace serial

Vec matvec(const Mat& m, std::span<const double> v) {
  if (m.size() < kParallelThreshold) return serial::matvec(m, v);
  check_matvec(m, v.size(), "matvec");
  Vec out(m.rows());
  const auto rows = static_cast<std::ptrdiff_t>(m.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) out[i] = row_dot(m.row(i), v);
  return out;
}

Vec matvec_t(const Mat& m, std::span<const double> v) {
  if (m.size() < kParallelThreshold) return serial::matvec_t(m, v);
  check_matvec_t(m, v.size());
  // Columns are independent; each one sums over rows in ascending order,
  // matching the serial accumulation order.
  Vec out(m.cols(), 0.0);
  const auto cols = static_cast<std::ptrdiff_t>(m.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j) * v[i];
    out[j] = s;
  }
  return out;
}

void outer_acc(Mat& acc, std::span<const double> a, std::span<const double> b) {
  if (acc.size() < kParallelThreshold) return serial::outer_acc(acc, a, b);
  check_outer(acc, a.size(), b.size());
  const auto rows = static_cast<std::ptrdiff_t>(a.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    auto r = acc.row(i);
    for (std::size_t j = 0; j < b.size(); ++j) r[j] += a[i] * b[j];
  }
}

Vec hadamard(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size(), "hadamard");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

Vec add(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size(), "add");
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

void add_inplace(std::span<double> acc, std::span<const double> v) {
  check_same(acc.size(), v.size(), "add_inplace");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  check_same(a.size(), b.size(), "dot");
  return row_dot(a, b);
}

double squared_norm(std::span<const double> v) { return row_dot(v, v); }

namespace {
// Largest double below 1. Saturated activations are held here so the open
// ranges (0, 1) and (-1, 1) survive rounding.
const double kBelowOne = std::nextafter(1.0, 0.0);
}  // namespace

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return std::min(1.0 / (1.0 + std::exp(-x)), kBelowOne);
  const double e = std::exp(x);
  return std::max(e / (1.0 + e), std::numeric_limits<double>::min());
}

Vec sigmoid(std::span<const double> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

Vec tanh(std::span<const double> v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(std::tanh(v[i]), -kBelowOne, kBelowOne);
  return out;
}

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
}

bool Rng::coin() { return (engine_() >> 63) != 0; }

Mat glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw ShapeError("glorot_init: empty shape");
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (double& x : m.flat()) x = rng.uniform(-limit, limit);
  return m;
}

}  // namespace optm
