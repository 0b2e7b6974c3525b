#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vtpmd/matrix.hpp"
#include "vtpmd/prune.hpp"

namespace vtpmd {

struct FitConfig {
  double lambda = 1e-4;
  std::optional<double> step;  // eta; defaults to 1 / (2 * lambda_max estimate)
  std::size_t iters = 500;
  Matrix calib;  // calibration activations, rows = samples, cols = W.rows
};

// ||X diag(a) W - X W||_F^2 + lambda * sum |a_i|
double objective(const Matrix& x, const Matrix& w, const Vector& a,
                 double lambda);

// Gradient of the smooth part: g_i = 2 (X col i)^T E (W row i)^T with
// E = X diag(a) W - X W.
Vector grad_a(const Matrix& x, const Matrix& w, const Vector& a);

// Soft threshold: sign(v_i) * max(|v_i| - t, 0).
Vector prox_l1(const Vector& v, double t);

struct FitResult {
  ImportanceScores scores;
  std::vector<double> objective_trace;  // value after every accepted step
  double final_step = 0.0;
};

// ISTA from a = 1: a <- prox_l1(a - eta * grad, eta * lambda). The step
// starts at 1 / (2 * lambda_max(M)) with M = (X^T X) o (W W^T) estimated
// by power iteration, and halves whenever a step would increase the
// objective. Ten consecutive rejected steps raise DivergenceDetected.
FitResult fit_scores(const Matrix& w, const FitConfig& cfg,
                     const std::string& layer_id = "");

}  // namespace vtpmd
