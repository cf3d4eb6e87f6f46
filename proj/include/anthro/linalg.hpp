#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "anthro/core.hpp"

namespace anthro {

/// Row-major dense matrix; rows are samples when used as a feature table.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != m.cols_) throw DataError("ragged feature rows");
      std::copy(rows[r].begin(), rows[r].end(), m.row_mut(r).begin());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<double> row_mut(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw DataError("row length mismatch");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  /// Copy keeping only the listed columns, in the given order.
  Matrix select_columns(std::span<const std::size_t> cols) const {
    Matrix out(rows_, cols.size());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j] >= cols_) throw DataError("column index out of range");
        out(r, j) = (*this)(r, cols[j]);
      }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mu(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) mu[c] += m(r, c);
  for (double& v : mu) v /= static_cast<double>(m.rows());
  return mu;
}

/// Unbiased sample covariance (divides by n - 1).
inline Matrix covariance(const Matrix& m) {
  if (m.rows() < 2) throw InsufficientDataError("covariance needs at least 2 samples");
  const auto mu = column_means(m);
  Matrix cov(m.cols(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double di = m(r, i) - mu[i];
      for (std::size_t j = i; j < m.cols(); ++j) cov(i, j) += di * (m(r, j) - mu[j]);
    }
  const double denom = static_cast<double>(m.rows() - 1);
  for (std::size_t i = 0; i < m.cols(); ++i)
    for (std::size_t j = i; j < m.cols(); ++j) cov(j, i) = cov(i, j) = cov(i, j) / denom;
  return cov;
}

/// Solves A x = b for symmetric positive-definite A by Cholesky factorization.
inline std::vector<double> cholesky_solve(Matrix a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw DataError("cholesky_solve: dimension mismatch");
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) throw DataError("matrix is not positive definite");
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  std::vector<double> y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= a(i, k) * y[k];
    y[i] /= a(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) y[i] -= a(k, i) * y[k];
    y[i] /= a(i, i);
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace anthro
