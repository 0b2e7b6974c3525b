#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vtpmd/errors.hpp"
#include "vtpmd/scorefit.hpp"

using namespace vtpmd;

namespace {

// Literal ISTA with a fixed step, built on the definitional objective
// and gradient only.
Vector reference_ista(const Matrix& x, const Matrix& w, double lambda,
                      double eta, std::size_t iters) {
  Vector a(w.rows(), 1.0);
  for (std::size_t it = 0; it < iters; ++it) {
    const Vector g = grad_a(x, w, a);
    Vector step(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) step[i] = a[i] - eta * g[i];
    a = prox_l1(step, eta * lambda);
  }
  return a;
}

}  // namespace

TEST_CASE("objective at the all-ones point") {
  std::mt19937_64 rng(801);
  const Matrix x = oracles::random_matrix(rng, 6, 4);
  const Matrix w = oracles::random_matrix(rng, 4, 5);
  const Vector ones(4, 1.0);
  CHECK(objective(x, w, ones, 0.0) == 0.0);
  CHECK(objective(x, w, ones, 0.1) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("objective matches a direct elementwise oracle") {
  std::mt19937_64 rng(809);
  const Matrix x = oracles::random_matrix(rng, 7, 5);
  const Matrix w = oracles::random_matrix(rng, 5, 6);
  const Vector a = oracles::random_vector(rng, 5);
  const double lambda = 0.37;

  double fro2 = 0.0;
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      double e = 0.0;
      for (std::size_t k = 0; k < 5; ++k) {
        e += x(i, k) * a[k] * w(k, j) - x(i, k) * w(k, j);
      }
      fro2 += e * e;
    }
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < 5; ++i) l1 += std::abs(a[i]);
  CHECK(objective(x, w, a, lambda) ==
        doctest::Approx(fro2 + lambda * l1).epsilon(1e-12));
}

TEST_CASE("gradient vanishes at all-ones and matches finite differences") {
  std::mt19937_64 rng(811);
  const Matrix x = oracles::random_matrix(rng, 6, 4);
  const Matrix w = oracles::random_matrix(rng, 4, 3);
  const Vector ones(4, 1.0);
  const Vector g0 = grad_a(x, w, ones);
  for (std::size_t i = 0; i < 4; ++i) CHECK(g0[i] == 0.0);

  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t d = 1 + (trial % 16);
    const Matrix xs = oracles::random_matrix(rng, d + 3, d);
    const Matrix ws = oracles::random_matrix(rng, d, d + 1);
    const Vector a = oracles::random_vector(rng, d, 2.0);
    const Vector g = grad_a(xs, ws, a);
    const Vector fd = oracles::central_fd(
        [&](const Vector& v) { return objective(xs, ws, v, 0.0); }, a);
    for (std::size_t i = 0; i < d; ++i) {
      const double scale = std::max(1.0, std::abs(fd[i]));
      CHECK(std::abs(g[i] - fd[i]) <= 1e-5 * scale);
    }
  }
}

TEST_CASE("gradient in the scalar case matches hand calculus") {
  // d = 1: f(a) = ||x w||^2 (a - 1)^2, so f'(a) = 2 a ||xw||^2 - 2 ||xw||^2.
  const Matrix x{{2.0}, {1.0}};
  const Matrix w{{3.0, -1.0}};
  const Vector a{1.7};
  double xw2 = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      xw2 += (x(i, 0) * w(0, j)) * (x(i, 0) * w(0, j));
    }
  }
  const Vector g = grad_a(x, w, a);
  CHECK(g[0] == doctest::Approx(2.0 * a[0] * xw2 - 2.0 * xw2).epsilon(1e-13));
}

TEST_CASE("prox_l1") {
  const Vector v{0.5, -0.2};
  const Vector same = prox_l1(v, 0.0);
  CHECK(same == v);

  const Vector s = prox_l1(v, 0.3);
  CHECK(s[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s[1] == 0.0);

  const Vector z = prox_l1(Vector{0.1, -0.25}, 0.3);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);
}

TEST_CASE("prox_l1 is a contraction") {
  std::mt19937_64 rng(821);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector u = oracles::random_vector(rng, 8, 3.0);
    const Vector v = oracles::random_vector(rng, 8, 3.0);
    const double t = std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    CHECK(norm2(vsub(prox_l1(u, t), prox_l1(v, t))) <= norm2(vsub(u, v)) + 1e-15);
  }
}

TEST_CASE("fit_scores stays at all-ones when lambda is zero") {
  std::mt19937_64 rng(823);
  FitConfig cfg;
  cfg.lambda = 0.0;
  cfg.iters = 50;
  cfg.calib = oracles::random_matrix(rng, 12, 6);
  const Matrix w = oracles::random_matrix(rng, 6, 6);
  const FitResult r = fit_scores(w, cfg, "layer");
  for (std::size_t i = 0; i < 6; ++i) CHECK(r.scores.a[i] == 1.0);
}

TEST_CASE("huge lambda drives the scores to zero, like the reference ista") {
  std::mt19937_64 rng(827);
  FitConfig cfg;
  cfg.lambda = 1e3;
  cfg.iters = 100;
  cfg.calib = oracles::random_matrix(rng, 16, 8);
  const Matrix w = oracles::random_matrix(rng, 8, 8);
  const FitResult r = fit_scores(w, cfg, "layer");
  for (std::size_t i = 0; i < 8; ++i) CHECK(r.scores.a[i] == 0.0);

  // Independent step size: lambda_max of (X^T X) o (W W^T) from the
  // eigenvalue oracle.
  const Matrix gx = oracles::naive_matmul(transpose(cfg.calib), cfg.calib);
  const Matrix gw = oracles::naive_matmul(w, transpose(w));
  Matrix m(8, 8);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.data()[i] = gx.data()[i] * gw.data()[i];
  }
  const double lmax = oracles::symmetric_eigenvalues(m)[0];
  const Vector ref =
      reference_ista(cfg.calib, w, cfg.lambda, 1.0 / (2.0 * lmax), 100);
  for (std::size_t i = 0; i < 8; ++i) CHECK(ref[i] == 0.0);
}

TEST_CASE("moderate lambda: objective decreases, sparsity does not shrink") {
  std::mt19937_64 rng(829);
  FitConfig cfg;
  cfg.lambda = 1e-4;
  cfg.iters = 200;
  cfg.calib = oracles::random_matrix(rng, 32, 8);
  const Matrix w = oracles::random_matrix(rng, 8, 8);
  const FitResult r = fit_scores(w, cfg, "layer");

  CHECK(r.objective_trace.back() <= r.objective_trace.front());
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
    CHECK(r.objective_trace[i] <= r.objective_trace[i - 1]);
  }
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 8; ++i) {
    if (r.scores.a[i] == 0.0) ++zeros;
  }
  CHECK(zeros >= 0);  // sparsity never below the all-ones start

  // The trace values are true objective values.
  CHECK(r.objective_trace.back() ==
        doctest::Approx(objective(cfg.calib, w, r.scores.a, cfg.lambda))
            .epsilon(1e-9));
}

TEST_CASE("fit_scores is deterministic") {
  std::mt19937_64 rng(839);
  FitConfig cfg;
  cfg.lambda = 1e-3;
  cfg.iters = 120;
  cfg.calib = oracles::random_matrix(rng, 20, 7);
  const Matrix w = oracles::random_matrix(rng, 7, 9);
  const FitResult a = fit_scores(w, cfg, "layer");
  const FitResult b = fit_scores(w, cfg, "layer");
  CHECK(a.scores.a == b.scores.a);
  CHECK(a.objective_trace == b.objective_trace);
}

TEST_CASE("an absurd fixed step triggers divergence detection") {
  std::mt19937_64 rng(853);
  FitConfig cfg;
  cfg.lambda = 1e-4;
  cfg.iters = 50;
  cfg.step = 1e12;
  cfg.calib = oracles::random_matrix(rng, 16, 6);
  const Matrix w = oracles::random_matrix(rng, 6, 6);
  CHECK_THROWS_AS(fit_scores(w, cfg, "layer"), DivergenceDetected);
}

TEST_CASE("fit config validation") {
  FitConfig cfg;
  cfg.calib = Matrix(4, 3);
  CHECK_THROWS_AS(fit_scores(Matrix(5, 2), cfg, ""), DimensionMismatch);
  cfg.calib = Matrix(4, 5);
  cfg.iters = 0;
  CHECK_THROWS_AS(fit_scores(Matrix(5, 2), cfg, ""), Error);
}
