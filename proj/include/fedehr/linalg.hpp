#pragma once

// Row-major dense matrix plus the one factorization the toolkit needs:
// column-pivoted Householder QR for least squares. Problem sizes here are
// ~1300 rows by ~12 columns, so clarity wins over blocking tricks.

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedehr/errors.hpp"

namespace fedehr {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  Matrix select_rows(const std::vector<std::size_t>& idx) const {
    Matrix out(idx.size(), cols);
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j) out.at(i, j) = at(idx[i], j);
    return out;
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

enum class RankPolicy {
  strict,    // rank deficiency is an error
  truncate,  // drop numerically dependent columns, zero their coefficients
};

// Least-squares solve of min ||A x - b|| via column-pivoted Householder QR.
// Pivots with magnitude below 1e-10 times the largest pivot mark dependent
// columns. Under RankPolicy::strict that raises SingularMatrix; under
// truncate the dependent columns get zero coefficients (the fitted values
// are the same orthogonal projection either way).
inline std::vector<double> solve_least_squares(const Matrix& a_in, const std::vector<double>& b_in,
                                               RankPolicy policy = RankPolicy::strict) {
  if (a_in.rows != b_in.size()) throw ShapeMismatch("rows of A must match length of b");
  const std::size_t m = a_in.rows;
  const std::size_t n = a_in.cols;
  if (m < n) throw ShapeMismatch("least squares needs at least as many rows as columns");

  Matrix a = a_in;
  std::vector<double> b = b_in;
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < n; ++j) perm[j] = j;

  // Running squared column norms for pivot selection.
  std::vector<double> col_norm2(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) col_norm2[j] += a.at(i, j) * a.at(i, j);

  std::vector<double> r_diag(n, 0.0);
  const std::size_t steps = std::min(m, n);

  for (std::size_t k = 0; k < steps; ++k) {
    // Pivot: bring the column with the largest remaining norm to position k.
    std::size_t pivot = k;
    for (std::size_t j = k + 1; j < n; ++j)
      if (col_norm2[j] > col_norm2[pivot]) pivot = j;
    if (pivot != k) {
      for (std::size_t i = 0; i < m; ++i) std::swap(a.at(i, k), a.at(i, pivot));
      std::swap(col_norm2[k], col_norm2[pivot]);
      std::swap(perm[k], perm[pivot]);
    }

    // Householder reflection clearing column k below the diagonal.
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) norm += a.at(i, k) * a.at(i, k);
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      r_diag[k] = 0.0;
      continue;
    }
    if (a.at(k, k) > 0) norm = -norm;
    for (std::size_t i = k; i < m; ++i) a.at(i, k) /= -norm;
    a.at(k, k) += 1.0;

    for (std::size_t j = k + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += a.at(i, k) * a.at(i, j);
      s = -s / a.at(k, k);
      for (std::size_t i = k; i < m; ++i) a.at(i, j) += s * a.at(i, k);
      // Downdate the running norm (recompute when cancellation bites).
      col_norm2[j] -= a.at(k, j) * a.at(k, j);
      if (col_norm2[j] < 0) col_norm2[j] = 0;
    }
    // Apply the reflection to the right-hand side as well.
    {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += a.at(i, k) * b[i];
      s = -s / a.at(k, k);
      for (std::size_t i = k; i < m; ++i) b[i] += s * a.at(i, k);
    }
    r_diag[k] = -norm;
  }

  double max_pivot = 0.0;
  for (std::size_t k = 0; k < steps; ++k) max_pivot = std::max(max_pivot, std::abs(r_diag[k]));
  if (max_pivot == 0.0) throw SingularMatrix("matrix of zeros");

  std::size_t rank = 0;
  while (rank < steps && std::abs(r_diag[rank]) >= 1e-10 * max_pivot) ++rank;
  if (rank < n && policy == RankPolicy::strict)
    throw SingularMatrix("rank " + std::to_string(rank) + " < " + std::to_string(n) + " columns");

  // Back substitution on the leading rank-by-rank triangle. R is stored above
  // the Householder vectors, diagonal in r_diag.
  std::vector<double> x_pivoted(n, 0.0);
  for (std::size_t ik = rank; ik-- > 0;) {
    double s = b[ik];
    for (std::size_t j = ik + 1; j < rank; ++j) s -= a.at(ik, j) * x_pivoted[j];
    x_pivoted[ik] = s / r_diag[ik];
  }

  std::vector<double> x(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) x[perm[j]] = x_pivoted[j];
  return x;
}

}  // namespace fedehr
