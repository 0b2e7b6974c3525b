// Test-side oracles, independent of the library's implementation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "vtpmd/matrix.hpp"

namespace oracles {

using vtpmd::Matrix;
using vtpmd::Vector;

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows,
                            std::size_t cols, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = dist(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, std::size_t len,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Vector v(len);
  for (std::size_t i = 0; i < len; ++i) v[i] = dist(rng);
  return v;
}

// Plain ijk triple loop, no blocking, no reordering.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += a(i, k) * b(k, j);
      c(i, j) = sum;
    }
  }
  return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

// Eigenvalues of a symmetric matrix by classic two-sided cyclic Jacobi,
// sorted nonincreasing. A different algorithm from the library's
// one-sided SVD sweep, used as the Gram-matrix oracle.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double api = a(p, i);
          const double aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

struct PruneOracle {
  double tau;
  std::vector<int> mask;
  std::size_t kept;
};

// Full sort with index tie-break; the reference for threshold and mask.
inline PruneOracle brute_force_prune(const Vector& scores, double rate) {
  const std::size_t d = scores.size();
  const double raw = (1.0 - rate) * static_cast<double>(d);
  const std::size_t keep =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    const double mx = std::abs(scores[x]);
    const double my = std::abs(scores[y]);
    if (mx != my) return mx > my;
    return x < y;
  });
  PruneOracle out;
  out.kept = keep;
  out.tau = std::abs(scores[order[keep - 1]]);
  out.mask.assign(d, 0);
  for (std::size_t i = 0; i < keep; ++i) out.mask[order[i]] = 1;
  return out;
}

// Central finite differences of a scalar function of a vector.
template <typename F>
Vector central_fd(const F& f, const Vector& a, double h = 1e-6) {
  Vector g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    Vector lo = a, hi = a;
    lo[i] -= h;
    hi[i] += h;
    g[i] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

// Frobenius reconstruction error ||a - b||_F.
inline double recon_err(const Matrix& a, const Matrix& b) {
  return vtpmd::frobenius_norm(vtpmd::sub(a, b));
}

// ||Q^T Q - I||_F over the stored columns.
inline double orthogonality_defect(const Matrix& q) {
  const Matrix gram = naive_matmul(vtpmd::transpose(q), q);
  double sum = 0.0;
  for (std::size_t i = 0; i < gram.rows(); ++i) {
    for (std::size_t j = 0; j < gram.cols(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      const double d = gram(i, j) - target;
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

// Rank-r matrix as a product of random factors.
inline Matrix constructed_rank(std::mt19937_64& rng, std::size_t m,
                               std::size_t n, std::size_t r) {
  return naive_matmul(random_matrix(rng, m, r), random_matrix(rng, r, n));
}

}  // namespace oracles
