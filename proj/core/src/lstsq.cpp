#include "vtpmd/lstsq.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "vtpmd/errors.hpp"

namespace vtpmd {

namespace {

// R x = y for upper-triangular R.
Vector back_substitute(const Matrix& r, const Vector& y) {
  const std::size_t n = r.cols();
  Vector x(n);
  for (std::size_t idx = n; idx-- > 0;) {
    double sum = y[idx];
    for (std::size_t j = idx + 1; j < n; ++j) sum -= r(idx, j) * x[j];
    if (r(idx, idx) == 0.0) {
      throw SingularMatrix("lstsq: zero pivot in triangular solve");
    }
    x[idx] = sum / r(idx, idx);
  }
  return x;
}

// R^T w = c for upper-triangular R (forward substitution on the transpose).
Vector forward_substitute_transposed(const Matrix& r, const Vector& c) {
  const std::size_t n = r.cols();
  Vector w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = c[i];
    for (std::size_t k = 0; k < i; ++k) sum -= r(k, i) * w[k];
    if (r(i, i) == 0.0) {
      throw SingularMatrix("lstsq: zero pivot in triangular solve");
    }
    w[i] = sum / r(i, i);
  }
  return w;
}

Vector solve_normal_equations(const Matrix& a, const Vector& b) {
  const Matrix at = transpose(a);
  const Matrix gram = matmul(at, a);
  const Vector rhs = matvec(at, b);
  const CholeskyFactor chol = cholesky(gram);
  return back_substitute(chol.r, forward_substitute_transposed(chol.r, rhs));
}

Vector solve_qr(const Matrix& a, const Vector& b) {
  const QRFactors f = qr_reduced(a);
  return back_substitute(f.r, matvec(transpose(f.q), b));
}

Vector solve_svd(const Matrix& a, const Vector& b) {
  const SVDFactors f = svd(a);
  const double tol = default_rank_tol(a.rows(), a.cols(),
                                      f.sigma.size() ? f.sigma[0] : 0.0);
  Vector utb = matvec(transpose(f.u), b);
  Vector scaled(f.sigma.size());
  for (std::size_t i = 0; i < f.sigma.size(); ++i) {
    scaled[i] = f.sigma[i] > tol ? utb[i] / f.sigma[i] : 0.0;
  }
  // x = V * scaled over the min(m, n) leading columns of V.
  Vector x(a.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < scaled.size(); ++j) sum += f.v(i, j) * scaled[j];
    x[i] = sum;
  }
  return x;
}

}  // namespace

Vector lstsq_solve(const Matrix& a, const Vector& b, LstsqMethod method) {
  if (a.rows() < a.cols()) {
    throw DimensionMismatch("lstsq_solve: requires rows >= cols");
  }
  if (b.size() != a.rows()) {
    throw DimensionMismatch("lstsq_solve: rhs length != rows");
  }
  switch (method) {
    case LstsqMethod::NormalEquations:
      return solve_normal_equations(a, b);
    case LstsqMethod::QR:
      return solve_qr(a, b);
    case LstsqMethod::SVD:
      return solve_svd(a, b);
  }
  throw Error("lstsq_solve: unknown method");
}

LstsqReport lstsq_compare(const Matrix& a, const Vector& b,
                          const std::optional<Vector>& reference) {
  auto run = [&](LstsqMethod method) {
    LstsqMethodResult res;
    try {
      res.solution = lstsq_solve(a, b, method);
      res.ok = true;
    } catch (const Error& e) {
      res.ok = false;
      res.error = e.what();
      res.solution_error = std::numeric_limits<double>::infinity();
      res.residual_norm = std::numeric_limits<double>::infinity();
      return res;
    }
    res.residual_norm = norm2(vsub(matvec(a, res.solution), b));
    if (reference) {
      const double ref_norm = norm2(*reference);
      const double err = norm2(vsub(res.solution, *reference));
      res.solution_error = ref_norm > 0.0 ? err / ref_norm : err;
    } else {
      res.solution_error = std::numeric_limits<double>::quiet_NaN();
    }

    std::vector<double> times;
    times.reserve(20);
    for (int rep = 0; rep < 20; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      (void)lstsq_solve(a, b, method);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    res.wall_time_seconds = (times[9] + times[10]) / 2.0;
    return res;
  };

  LstsqReport report;
  report.normal_equations = run(LstsqMethod::NormalEquations);
  report.qr = run(LstsqMethod::QR);
  report.svd = run(LstsqMethod::SVD);
  return report;
}

Matrix lauchli_matrix(std::size_t n, double eps) {
  Matrix a(n + 1, n);
  for (std::size_t j = 0; j < n; ++j) {
    a(0, j) = 1.0;
    a(j + 1, j) = eps;
  }
  return a;
}

}  // namespace vtpmd
