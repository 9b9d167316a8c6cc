#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace botscope {

/// Row-major dense matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric matrix storing only the upper triangle (packed, row by row).
/// Symmetry is structural: (i,j) and (j,i) address the same element.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(std::size_t n, double fill = 0.0)
      : n_(n), data_(n * (n + 1) / 2, fill) {}

  static SymmetricMatrix identity(std::size_t n) {
    SymmetricMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  /// Reads the upper triangle of a square dense matrix.
  static SymmetricMatrix from_dense(const DenseMatrix& d) {
    assert(d.rows() == d.cols());
    SymmetricMatrix m(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = i; j < d.cols(); ++j) m(i, j) = d(i, j);
    return m;
  }

  std::size_t size() const { return n_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[index(i, j)]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[index(i, j)]; }

  /// Contiguous upper-triangle slice of row i, columns i..n-1.
  std::span<double> upper_row(std::size_t i) { return {data_.data() + offset(i), n_ - i}; }
  std::span<const double> upper_row(std::size_t i) const {
    return {data_.data() + offset(i), n_ - i};
  }

  DenseMatrix to_dense() const {
    DenseMatrix d(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i; j < n_; ++j) d(i, j) = d(j, i) = (*this)(i, j);
    return d;
  }

  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const {
    assert(x.size() == n_ && y.size() == n_);
    for (std::size_t i = 0; i < n_; ++i) y[i] = 0.0;
    const double* a = data_.data();
    for (std::size_t i = 0; i < n_; ++i) {
      const double xi = x[i];
      double acc = a[0] * xi;
      for (std::size_t j = i + 1; j < n_; ++j) {
        acc += a[j - i] * x[j];
        y[j] += a[j - i] * xi;
      }
      y[i] += acc;
      a += n_ - i;
    }
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  const std::vector<double>& packed() const { return data_; }

  friend bool operator==(const SymmetricMatrix&, const SymmetricMatrix&) = default;

 private:
  std::size_t offset(std::size_t i) const { return i * n_ - (i * (i - 1)) / 2; }
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    assert(j < n_);
    return offset(i) + (j - i);
  }

  std::size_t n_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace botscope
