#include <cmath>
#include <string>

#include "vtpmd/decomp.hpp"
#include "vtpmd/errors.hpp"

namespace vtpmd {

// Gaussian elimination with partial pivoting, square inputs only.
// Pivot per column is the max-magnitude entry, ties to the lowest row.
// A pivot below 1e-14 * ||A||_F is recorded in zero_pivots and its
// elimination step skipped; the factorization is still returned.
PLUFactors lu(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("lu: requires a square matrix, got " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  const std::size_t n = a.rows();
  const double pivot_floor = 1e-14 * frobenius_norm(a);

  Matrix u = a;
  Matrix l = Matrix::identity(n);
  PLUFactors out;
  out.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.perm[i] = i;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot_row = k;
    double pivot_mag = std::abs(u(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double mag = std::abs(u(i, k));
      if (mag > pivot_mag) {
        pivot_mag = mag;
        pivot_row = i;
      }
    }
    if (pivot_row != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(u(k, j), u(pivot_row, j));
      for (std::size_t j = 0; j < k; ++j) std::swap(l(k, j), l(pivot_row, j));
      std::swap(out.perm[k], out.perm[pivot_row]);
    }

    if (pivot_mag <= pivot_floor) {
      out.zero_pivots.push_back(k);
      continue;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double mult = u(i, k) / u(k, k);
      l(i, k) = mult;
      u(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) u(i, j) -= mult * u(k, j);
    }
  }

  out.l = std::move(l);
  out.u = std::move(u);
  return out;
}

CholeskyFactor cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("cholesky: requires a square matrix");
  }
  const std::size_t n = a.rows();
  const double sym_tol = 1e-12 * frobenius_norm(a);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j) - a(j, i)) > sym_tol) {
        throw NotSymmetric("cholesky: |A[" + std::to_string(i) + "][" +
                           std::to_string(j) + "] - A[" + std::to_string(j) +
                           "][" + std::to_string(i) + "]| exceeds tolerance");
      }
    }
  }

  Matrix r(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= r(k, j) * r(k, j);
    if (diag <= 0.0) {
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) +
                                " is not positive");
    }
    r(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < n; ++i) {
      double off = a(j, i);
      for (std::size_t k = 0; k < j; ++k) off -= r(k, j) * r(k, i);
      r(j, i) = off / r(j, j);
    }
  }
  return {std::move(r)};
}

}  // namespace vtpmd
