#pragma once

#include <cstddef>
#include <optional>
#include <variant>
#include <vector>

#include "vtpmd/matrix.hpp"

namespace vtpmd {

// P*A = L*U with partial pivoting. perm[i] is the source row of A that
// appears in row i of P*A. A numerically-zero pivot does not abort the
// factorization; the affected column indices are recorded instead.
struct PLUFactors {
  std::vector<std::size_t> perm;
  Matrix l;  // unit lower triangular, |entries| <= 1
  Matrix u;  // upper triangular
  std::vector<std::size_t> zero_pivots;

  bool singular() const { return !zero_pivots.empty(); }
};

// A = R^T R with R upper triangular, positive diagonal.
struct CholeskyFactor {
  Matrix r;
};

enum class QRVariant { Full, Reduced };

// A = Q R. Full: Q m x m, R m x n. Reduced: Q m x n, R n x n, sliced
// from the full factorization. R carries a nonnegative diagonal.
struct QRFactors {
  QRVariant variant;
  Matrix q;
  Matrix r;
};

// A*Pi = Q [[R1, S], [0, 0]] with |diag(R1)| nonincreasing. perm[j] is
// the source column of A that appears in column j of A*Pi. rank is the
// number of diagonal entries above rank_tol.
struct PivotedQRFactors {
  Matrix q;   // m x m
  Matrix r1;  // rank x rank, nonsingular upper triangular
  Matrix s;   // rank x (n - rank)
  std::vector<std::size_t> perm;
  std::size_t rank = 0;
  double rank_tol = 0.0;
};

// A = Q [[L, 0], [0, 0]] Ustar^T with L lower triangular nonsingular.
struct CODFactors {
  Matrix q;      // m x m
  Matrix l;      // rank x rank
  Matrix ustar;  // n x n, applied transposed
  std::size_t rank = 0;
};

enum class SVDVariant { Full, Condensed, Truncated };

// A = U diag(sigma) V^T, sigma nonnegative and nonincreasing.
// Full: U m x m, V n x n, sigma of length min(m, n).
// Condensed/Truncated: k retained triples, U m x k, V n x k.
struct SVDFactors {
  SVDVariant variant;
  Matrix u;
  Vector sigma;
  Matrix v;
};

struct FixedRank {
  std::size_t k;
};

// Keep the smallest k with sum_{i<=k} sigma_i^2 >= (1 - delta) * sum sigma_i^2.
struct EnergyFraction {
  double delta;
};

using RankPolicy = std::variant<FixedRank, EnergyFraction>;

// Smallest prefix of `spectrum` whose squared mass reaches the policy
// target; FixedRank(k) returns k. Throws RankTooLarge when k exceeds
// spectrum.size() and RankTooSmall when k == 0.
std::size_t rank_from_policy(const Vector& spectrum, const RankPolicy& policy);

PLUFactors lu(const Matrix& a);

CholeskyFactor cholesky(const Matrix& a);

QRFactors qr_full(const Matrix& a);
QRFactors qr_reduced(const Matrix& a);

// rank_tol defaults to max(m, n) * eps * |R[0][0]|.
PivotedQRFactors qr_pivoted(const Matrix& a,
                            std::optional<double> rank_tol = std::nullopt);

CODFactors cod(const Matrix& a, std::optional<double> rank_tol = std::nullopt);

SVDFactors svd(const Matrix& a);

// Keeps exactly the singular triples with sigma_i > rank_tol; the
// default tolerance is max(m, n) * eps * sigma_1.
SVDFactors svd_condensed(const Matrix& a,
                         std::optional<double> rank_tol = std::nullopt);

SVDFactors svd_truncate(const SVDFactors& f, const RankPolicy& policy);

// The EVD route is rejected for this pipeline: pruned projections are
// rectangular in general and diagonalizability is not guaranteed.
// Always throws NotSupported.
[[noreturn]] void evd_guard(const Matrix& a);

// Scatter the columns of a factor computed against A*Pi back to the
// original column order: out[:, perm[j]] = r[:, j].
Matrix unpermute_cols(const Matrix& r, const std::vector<std::size_t>& perm);

double default_rank_tol(std::size_t rows, std::size_t cols, double largest);

}  // namespace vtpmd
