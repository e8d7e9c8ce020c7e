#include "hrme/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hrme::numeric {

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) {
      throw DimensionMismatch("from_rows: ragged row lengths");
    }
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double* src = data_.data() + indices[i] * cols_;
    double* dst = out.data_.data() + i * cols_;
    for (std::size_t j = 0; j < cols_; ++j) dst[j] = src[j];
  }
  return out;
}

bool all_finite(std::span<const double> v) noexcept {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool all_finite(const Matrix& m) noexcept { return all_finite(std::span<const double>(m.data())); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("squared_distance: vectors of length " +
                            std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (!(gamma > 0.0)) throw Error("rbf_kernel: gamma must be positive");
  return std::exp(-gamma * squared_distance(a, b));
}

Matrix gram_matrix(const Matrix& x, double gamma) {
  if (x.empty()) throw DimensionMismatch("gram_matrix: empty input");
  const std::size_t n = x.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = rbf_kernel(x.row(i), x.row(j), gamma);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix rbf_design(const Matrix& x, const Matrix& anchors, double gamma) {
  if (x.cols() != anchors.cols()) {
    throw DimensionMismatch("rbf_design: feature dimension mismatch");
  }
  Matrix out(x.rows(), anchors.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < anchors.rows(); ++j) {
      out(i, j) = std::exp(-gamma * squared_distance(xi, anchors.row(j)));
    }
  }
  return out;
}

namespace {

constexpr double kPivotFloor = 1e-12;
constexpr double kSymmetryTol = 1e-10;

// In-place lower Cholesky factor of a copy of A.
Matrix cholesky_factor(const Matrix& a) {
  const std::size_t n = a.rows();
  Matrix l = a;
  double* ld = l.data().data();
  for (std::size_t j = 0; j < n; ++j) {
    double d = ld[j * n + j];
    const double* rowj = ld + j * n;
    for (std::size_t k = 0; k < j; ++k) d -= rowj[k] * rowj[k];
    if (d <= kPivotFloor) {
      throw NotPositiveDefinite("cholesky_solve: pivot " + std::to_string(d) +
                                " at column " + std::to_string(j) +
                                "; increase regularization");
    }
    const double diag = std::sqrt(d);
    ld[j * n + j] = diag;
    const double inv = 1.0 / diag;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = ld[i * n + j];
      const double* rowi = ld + i * n;
      for (std::size_t k = 0; k < j; ++k) s -= rowi[k] * rowj[k];
      ld[i * n + j] = s * inv;
    }
  }
  // Zero the strict upper triangle so the factor is well defined.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) ld[i * n + j] = 0.0;
  }
  return l;
}

Vector cholesky_apply(const Matrix& l, const Vector& b) {
  const std::size_t n = l.rows();
  Vector x = b;
  const double* ld = l.data().data();
  for (std::size_t i = 0; i < n; ++i) {  // forward: L y = b
    double s = x[i];
    const double* rowi = ld + i * n;
    for (std::size_t k = 0; k < i; ++k) s -= rowi[k] * x[k];
    x[i] = s / rowi[i];
  }
  for (std::size_t ii = n; ii-- > 0;) {  // backward: L^T x = y
    double s = x[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= ld[k * n + ii] * x[k];
    x[ii] = s / ld[ii * n + ii];
  }
  return x;
}

Vector residual(const Matrix& a, const Vector& x, const Vector& b) {
  const std::size_t n = a.rows();
  Vector r(n);
  const double* ad = a.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    const double* rowi = ad + i * n;
    for (std::size_t k = 0; k < n; ++k) s += rowi[k] * x[k];
    r[i] = b[i] - s;
  }
  return r;
}

double inf_norm(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

Vector cholesky_solve(const Matrix& a, const Vector& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionMismatch("cholesky_solve: matrix not square");
  if (b.size() != n) throw DimensionMismatch("cholesky_solve: rhs length mismatch");
  if (!all_finite(a) || !all_finite(b)) throw Error("cholesky_solve: non-finite input");
  double scale = 1.0;
  for (double v : a.data()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > kSymmetryTol * scale) {
        throw Error("cholesky_solve: matrix not symmetric");
      }
    }
  }

  const Matrix l = cholesky_factor(a);
  Vector x = cholesky_apply(l, b);

  const double tol = 1e-8 * (1.0 + inf_norm(b));
  Vector r = residual(a, x, b);
  if (inf_norm(r) > tol) {  // one refinement pass
    const Vector dx = cholesky_apply(l, r);
    for (std::size_t i = 0; i < n; ++i) x[i] += dx[i];
    r = residual(a, x, b);
    if (inf_norm(r) > tol) {
      throw NotPositiveDefinite("cholesky_solve: system too ill-conditioned; "
                                "increase regularization");
    }
  }
  return x;
}

}  // namespace hrme::numeric
