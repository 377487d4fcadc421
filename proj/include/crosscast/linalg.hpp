#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "crosscast/error.hpp"

namespace crosscast {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// y = M x
inline Vec matvec(const Matrix& m, std::span<const double> x) {
  Vec y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0.0;
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

/// y += Mᵀ x, accumulating into an existing vector of size cols().
inline void add_matvec_transposed(const Matrix& m, std::span<const double> x,
                                  std::span<double> y) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += row[c] * x[r];
  }
}

/// M += a bᵀ (rank-one accumulate).
inline void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += a[r] * b[c];
  }
}

/// Least-squares minimizer of ‖A x − b‖₂ via Householder QR, m ≥ n.
/// A rank-deficient design is an error; the message carries the zero-based
/// index of the first column that is linearly dependent on its predecessors.
inline Vec solve_least_squares(Matrix a, Vec b) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (m < n) throw std::invalid_argument("least squares needs rows >= cols");
  if (b.size() != m) throw std::invalid_argument("rhs length mismatch");

  // Reduce A to R in place, applying the same reflections to b. The
  // reflector sign follows the pivot so the v₁ = 1 + |x₁|/‖x‖ entry never
  // cancels; the resulting R diagonal is −norm.
  Vec diag(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) norm = std::hypot(norm, a(i, k));
    if (norm != 0.0) {
      if (a(k, k) < 0.0) norm = -norm;
      for (std::size_t i = k; i < m; ++i) a(i, k) /= norm;
      a(k, k) += 1.0;
      for (std::size_t j = k + 1; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += a(i, k) * a(i, j);
        s = -s / a(k, k);
        for (std::size_t i = k; i < m; ++i) a(i, j) += s * a(i, k);
      }
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += a(i, k) * b[i];
      s = -s / a(k, k);
      for (std::size_t i = k; i < m; ++i) b[i] += s * a(i, k);
    }
    diag[k] = -norm;
  }

  double max_diag = 0.0;
  for (double d : diag) max_diag = std::max(max_diag, std::abs(d));
  const double tol =
      max_diag * static_cast<double>(std::max(m, n)) * std::numeric_limits<double>::epsilon() * 64.0;
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(diag[k]) <= tol)
      throw Error("rank-deficient design matrix: column " + std::to_string(k) +
                  " is linearly dependent on earlier columns");

  // Back substitution on R (strict upper part of a, diagonal in diag).
  Vec x(n, 0.0);
  for (std::size_t kk = n; kk-- > 0;) {
    double s = b[kk];
    for (std::size_t j = kk + 1; j < n; ++j) s -= a(kk, j) * x[j];
    x[kk] = s / diag[kk];
  }
  return x;
}

}  // namespace crosscast
