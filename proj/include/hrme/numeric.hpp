#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hrme/errors.hpp"

namespace hrme::numeric {

using Vector = std::vector<double>;

// Dense row-major matrix. Sizes here are desk scale, so there is no
// blocking or sparsity; every reduction runs sequentially in ascending
// index order so results reproduce bit-for-bit between runs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<Vector>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }

  // Copies the given rows into a new matrix, preserving order.
  Matrix gather_rows(std::span<const std::size_t> indices) const;

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> v) noexcept;
bool all_finite(const Matrix& m) noexcept;

double squared_distance(std::span<const double> a, std::span<const double> b);

// exp(-gamma * |a - b|^2); symmetric, in (0, 1].
double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// Full kernel matrix of X against itself: symmetric (mirrored entries are
// bit-equal) with an exact unit diagonal.
Matrix gram_matrix(const Matrix& x, double gamma);

// Cross-kernel block: out(i, j) = rbf_kernel(x.row(i), anchors.row(j)).
Matrix rbf_design(const Matrix& x, const Matrix& anchors, double gamma);

// Solves A x = b for a symmetric positive-definite A via a Cholesky
// factorization. Throws NotPositiveDefinite when a pivot falls to 1e-12
// or below; callers respond by raising their ridge term. One round of
// iterative refinement keeps the residual below 1e-8 * (1 + |b|_inf).
Vector cholesky_solve(const Matrix& a, const Vector& b);

}  // namespace hrme::numeric
