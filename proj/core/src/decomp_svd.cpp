#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "vtpmd/decomp.hpp"
#include "vtpmd/errors.hpp"

// One-sided Jacobi SVD (Hestenes). Plane rotations orthogonalize the
// columns of the working matrix; on exit the column norms are the
// singular values and the accumulated rotations form V. Column pairs
// are swept cyclically with a relative off-diagonal threshold, so small
// singular values keep high relative accuracy. Wide inputs are handled
// on the transpose with U and V swapped back.

namespace vtpmd {

namespace {

constexpr int kMaxSweeps = 100;

struct ThinSVD {
  Matrix g;  // m x n, columns u_j * sigma_j after convergence
  Matrix v;  // n x n
  std::vector<double> sigma;
};

ThinSVD jacobi_orthogonalize(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  ThinSVD out{a, Matrix::identity(n), std::vector<double>(n, 0.0)};
  Matrix& g = out.g;
  Matrix& v = out.v;

  const double tol = 10.0 * static_cast<double>(m) *
                     std::numeric_limits<double>::epsilon();

  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double gp = g(i, p);
          const double gq = g(i, q);
          app += gp * gp;
          aqq += gq * gq;
          apq += gp * gq;
        }
        if (app == 0.0 || aqq == 0.0) continue;
        if (std::abs(apq) <= tol * std::sqrt(app * aqq)) continue;
        converged = false;

        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;

        for (std::size_t i = 0; i < m; ++i) {
          const double gp = g(i, p);
          const double gq = g(i, q);
          g(i, p) = c * gp - s * gq;
          g(i, q) = s * gp + c * gq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p);
          const double vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
  }
  if (!converged) {
    throw ConvergenceFailure("svd: Jacobi sweep cap (" +
                             std::to_string(kMaxSweeps) + ") exceeded");
  }

  for (std::size_t j = 0; j < n; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += g(i, j) * g(i, j);
    out.sigma[j] = std::sqrt(sum);
  }
  return out;
}

// The singular vectors for sigma = 0 are undefined, and a full U needs
// m - n extra columns anyway; both are completed from a Householder QR
// of the valid columns, whose trailing Q columns form a deterministic
// orthonormal complement. Valid columns occupy the leading slots (the
// sort puts zero sigmas last).
void complete_basis(Matrix& u, std::size_t valid_count) {
  const std::size_t m = u.rows();
  if (valid_count == m) return;
  if (valid_count == 0) {
    u = Matrix::identity(m);
    return;
  }
  Matrix leading(m, valid_count);
  for (std::size_t j = 0; j < valid_count; ++j) {
    for (std::size_t i = 0; i < m; ++i) leading(i, j) = u(i, j);
  }
  const QRFactors f = qr_full(leading);
  for (std::size_t j = valid_count; j < m; ++j) {
    for (std::size_t i = 0; i < m; ++i) u(i, j) = f.q(i, j);
  }
}

// Sign convention: the max-|.| entry of every U column is positive
// (ties to the lowest row index); paired V columns are negated along.
void fix_signs(Matrix& u, Matrix& v, std::size_t pairs) {
  for (std::size_t j = 0; j < u.cols(); ++j) {
    std::size_t arg = 0;
    double mag = std::abs(u(0, j));
    for (std::size_t i = 1; i < u.rows(); ++i) {
      if (std::abs(u(i, j)) > mag) {
        mag = std::abs(u(i, j));
        arg = i;
      }
    }
    if (u(arg, j) < 0.0) {
      for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = -u(i, j);
      if (j < pairs) {
        for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
      }
    }
  }
  // Unpaired V columns get the same convention on their own.
  for (std::size_t j = pairs; j < v.cols(); ++j) {
    std::size_t arg = 0;
    double mag = std::abs(v(0, j));
    for (std::size_t i = 1; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) > mag) {
        mag = std::abs(v(i, j));
        arg = i;
      }
    }
    if (v(arg, j) < 0.0) {
      for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
    }
  }
}

// Full SVD of a tall-or-square matrix (m >= n).
SVDFactors svd_tall(const Matrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  ThinSVD thin = jacobi_orthogonalize(a);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return thin.sigma[x] > thin.sigma[y];
  });

  SVDFactors out;
  out.variant = SVDVariant::Full;
  out.u = Matrix(m, m);
  out.v = Matrix(n, n);
  out.sigma = Vector(n);

  std::size_t valid_count = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.sigma[j] = thin.sigma[src];
    for (std::size_t i = 0; i < n; ++i) out.v(i, j) = thin.v(i, src);
    if (thin.sigma[src] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) {
        out.u(i, j) = thin.g(i, src) / thin.sigma[src];
      }
      ++valid_count;
    }
  }
  complete_basis(out.u, valid_count);
  return out;
}

}  // namespace

SVDFactors svd(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw DimensionMismatch("svd: empty matrix");
  }
  SVDFactors out;
  if (a.rows() >= a.cols()) {
    out = svd_tall(a);
  } else {
    SVDFactors t = svd_tall(transpose(a));
    out = {SVDVariant::Full, std::move(t.v), std::move(t.sigma),
           std::move(t.u)};
  }
  // The convention binds the final orientation, so it is applied after
  // any transpose swap.
  fix_signs(out.u, out.v, std::min(a.rows(), a.cols()));
  return out;
}

SVDFactors svd_condensed(const Matrix& a, std::optional<double> rank_tol) {
  if (rank_tol && *rank_tol < 0.0) {
    throw Error("svd_condensed: rank_tol must be nonnegative");
  }
  SVDFactors full = svd(a);
  const double tol =
      rank_tol ? *rank_tol
               : default_rank_tol(a.rows(), a.cols(),
                                  full.sigma.size() ? full.sigma[0] : 0.0);
  std::size_t k = 0;
  while (k < full.sigma.size() && full.sigma[k] > tol) ++k;

  SVDFactors out;
  out.variant = SVDVariant::Condensed;
  out.u = full.u.block(0, 0, a.rows(), k);
  out.v = full.v.block(0, 0, a.cols(), k);
  out.sigma = Vector(k);
  for (std::size_t i = 0; i < k; ++i) out.sigma[i] = full.sigma[i];
  return out;
}

SVDFactors svd_truncate(const SVDFactors& f, const RankPolicy& policy) {
  const std::size_t k = rank_from_policy(f.sigma, policy);
  SVDFactors out;
  out.variant = SVDVariant::Truncated;
  out.u = f.u.block(0, 0, f.u.rows(), k);
  out.v = f.v.block(0, 0, f.v.rows(), k);
  out.sigma = Vector(k);
  for (std::size_t i = 0; i < k; ++i) out.sigma[i] = f.sigma[i];
  return out;
}

}  // namespace vtpmd
