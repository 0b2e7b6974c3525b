#pragma once

#include <optional>
#include <string>

#include "vtpmd/decomp.hpp"
#include "vtpmd/matrix.hpp"

namespace vtpmd {

enum class LstsqMethod { NormalEquations, QR, SVD };

// Solves min ||A x - b||_2 for a tall-or-square A.
//   NormalEquations: Cholesky on A^T A (fast, squares the condition number)
//   QR:              reduced QR + back substitution
//   SVD:             pseudoinverse, sigma_i <= rank_tol treated as zero
Vector lstsq_solve(const Matrix& a, const Vector& b, LstsqMethod method);

struct LstsqMethodResult {
  bool ok = false;
  std::string error;
  Vector solution;
  double residual_norm = 0.0;
  // Relative error vs the reference solution; NaN when no reference was
  // given, +inf when the method failed.
  double solution_error = 0.0;
  double wall_time_seconds = 0.0;  // median of 20 runs
};

struct LstsqReport {
  LstsqMethodResult normal_equations;
  LstsqMethodResult qr;
  LstsqMethodResult svd;
};

LstsqReport lstsq_compare(const Matrix& a, const Vector& b,
                          const std::optional<Vector>& reference = std::nullopt);

// (n+1) x n least-squares test matrix: a row of ones on top of eps * I.
// Its Gram matrix is ones + eps^2 I, which collapses in finite precision
// and exposes the normal-equations route.
Matrix lauchli_matrix(std::size_t n, double eps);

}  // namespace vtpmd
