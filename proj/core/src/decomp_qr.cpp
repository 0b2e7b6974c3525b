#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vtpmd/decomp.hpp"
#include "vtpmd/errors.hpp"

// Householder QR kernels: plain, and with greedy column pivoting on the
// residual column norms. Q is accumulated explicitly (desk-scale sizes),
// and the diagonal of R is made nonnegative afterwards by absorbing
// signs into Q so repeated runs produce identical bytes.

namespace vtpmd {

namespace {

struct Reflector {
  std::size_t offset;      // first row the reflector acts on
  std::vector<double> v;   // Householder vector, length m - offset
  double tau;              // 2 / (v^T v), or 0 for an identity step
};

double column_tail_norm(const Matrix& b, std::size_t col, std::size_t from) {
  double sum = 0.0;
  for (std::size_t i = from; i < b.rows(); ++i) sum += b(i, col) * b(i, col);
  return std::sqrt(sum);
}

// Forms the reflector for column k acting on rows k..m-1 of B and applies
// it to columns k..n-1. Leaves the implied zeros as exact zeros.
Reflector eliminate_column(Matrix& b, std::size_t k) {
  const std::size_t m = b.rows();
  const std::size_t n = b.cols();
  Reflector ref;
  ref.offset = k;
  ref.v.assign(m - k, 0.0);
  for (std::size_t i = k; i < m; ++i) ref.v[i - k] = b(i, k);

  double norm = 0.0;
  for (double x : ref.v) norm += x * x;
  norm = std::sqrt(norm);

  if (norm == 0.0) {
    ref.tau = 0.0;
    return ref;
  }

  const double alpha = ref.v[0] >= 0.0 ? -norm : norm;
  ref.v[0] -= alpha;
  double vtv = 0.0;
  for (double x : ref.v) vtv += x * x;
  if (vtv == 0.0) {
    // Column already of the form alpha*e1; nothing to reflect.
    ref.tau = 0.0;
    b(k, k) = alpha;
    return ref;
  }
  ref.tau = 2.0 / vtv;

  for (std::size_t j = k; j < n; ++j) {
    double proj = 0.0;
    for (std::size_t i = k; i < m; ++i) proj += ref.v[i - k] * b(i, j);
    proj *= ref.tau;
    for (std::size_t i = k; i < m; ++i) b(i, j) -= proj * ref.v[i - k];
  }
  b(k, k) = alpha;
  for (std::size_t i = k + 1; i < m; ++i) b(i, k) = 0.0;
  return ref;
}

// Q = H_0 H_1 ... H_{p-1}, accumulated backwards onto the identity.
Matrix accumulate_q(const std::vector<Reflector>& refs, std::size_t m) {
  Matrix q = Matrix::identity(m);
  for (std::size_t idx = refs.size(); idx-- > 0;) {
    const Reflector& ref = refs[idx];
    if (ref.tau == 0.0) continue;
    const std::size_t k = ref.offset;
    for (std::size_t j = 0; j < m; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < m; ++i) proj += ref.v[i - k] * q(i, j);
      proj *= ref.tau;
      for (std::size_t i = k; i < m; ++i) q(i, j) -= proj * ref.v[i - k];
    }
  }
  return q;
}

// Flip signs so diag(R) >= 0, compensating in the columns of Q.
void make_diagonal_nonnegative(Matrix& q, Matrix& r) {
  const std::size_t p = std::min(r.rows(), r.cols());
  for (std::size_t i = 0; i < p; ++i) {
    if (r(i, i) < 0.0) {
      for (std::size_t j = 0; j < r.cols(); ++j) r(i, j) = -r(i, j);
      for (std::size_t row = 0; row < q.rows(); ++row) q(row, i) = -q(row, i);
    }
  }
}

Matrix upper_triangle(const Matrix& b) {
  Matrix r(b.rows(), b.cols());
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t j = i; j < b.cols(); ++j) r(i, j) = b(i, j);
  }
  return r;
}

}  // namespace

QRFactors qr_full(const Matrix& a) {
  if (a.rows() < a.cols()) {
    throw DimensionMismatch("qr_full: requires rows >= cols, got " +
                            std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()));
  }
  Matrix b = a;
  std::vector<Reflector> refs;
  const std::size_t p = std::min(a.rows(), a.cols());
  refs.reserve(p);
  for (std::size_t k = 0; k < p; ++k) refs.push_back(eliminate_column(b, k));

  Matrix q = accumulate_q(refs, a.rows());
  Matrix r = upper_triangle(b);
  make_diagonal_nonnegative(q, r);
  return {QRVariant::Full, std::move(q), std::move(r)};
}

QRFactors qr_reduced(const Matrix& a) {
  QRFactors full = qr_full(a);
  const std::size_t n = a.cols();
  return {QRVariant::Reduced, full.q.block(0, 0, a.rows(), n),
          full.r.block(0, 0, n, n)};
}

PivotedQRFactors qr_pivoted(const Matrix& a, std::optional<double> rank_tol) {
  if (rank_tol && *rank_tol < 0.0) {
    throw Error("qr_pivoted: rank_tol must be nonnegative");
  }
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix b = a;
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < n; ++j) perm[j] = j;

  std::vector<Reflector> refs;
  const std::size_t p = std::min(m, n);
  refs.reserve(p);
  for (std::size_t k = 0; k < p; ++k) {
    // Greedy pivot: remaining column of largest residual norm, ties to
    // the lowest original index.
    std::size_t best = k;
    double best_norm = column_tail_norm(b, k, k);
    for (std::size_t j = k + 1; j < n; ++j) {
      const double nj = column_tail_norm(b, j, k);
      if (nj > best_norm ||
          (nj == best_norm && perm[j] < perm[best])) {
        best = j;
        best_norm = nj;
      }
    }
    if (best != k) {
      for (std::size_t i = 0; i < m; ++i) std::swap(b(i, k), b(i, best));
      std::swap(perm[k], perm[best]);
    }
    refs.push_back(eliminate_column(b, k));
  }

  Matrix q = accumulate_q(refs, m);
  Matrix r = upper_triangle(b);
  make_diagonal_nonnegative(q, r);

  const double tol =
      rank_tol ? *rank_tol : default_rank_tol(m, n, std::abs(r(0, 0)));
  std::size_t rank = 0;
  for (std::size_t i = 0; i < p; ++i) {
    if (std::abs(r(i, i)) > tol) ++rank;
  }

  PivotedQRFactors out;
  out.q = std::move(q);
  out.r1 = r.block(0, 0, rank, rank);
  out.s = r.block(0, rank, rank, n - rank);
  out.perm = std::move(perm);
  out.rank = rank;
  out.rank_tol = tol;
  return out;
}

CODFactors cod(const Matrix& a, std::optional<double> rank_tol) {
  PivotedQRFactors p = qr_pivoted(a, rank_tol);
  const std::size_t n = a.cols();
  const std::size_t r = p.rank;

  CODFactors out;
  out.rank = r;
  out.q = std::move(p.q);
  if (r == 0) {
    out.l = Matrix(0, 0);
    out.ustar = Matrix::identity(n);
    return out;
  }

  // Stack [R1^T; S^T] (n x r) and QR it: [R1 S] = R2^T Z^T, so
  // A = Q [[R2^T, 0], [0, 0]] Z^T Pi^T with Ustar = Pi Z.
  Matrix stacked(n, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) stacked(j, i) = p.r1(i, j);
    for (std::size_t j = 0; j < n - r; ++j) stacked(r + j, i) = p.s(i, j);
  }
  QRFactors second = qr_full(stacked);

  Matrix l(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j <= i; ++j) l(i, j) = second.r(j, i);
  }

  Matrix ustar(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < n; ++c) ustar(p.perm[j], c) = second.q(j, c);
  }

  out.l = std::move(l);
  out.ustar = std::move(ustar);
  return out;
}

}  // namespace vtpmd
