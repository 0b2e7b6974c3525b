#include "vtpmd/scorefit.hpp"

#include <cmath>

#include "vtpmd/errors.hpp"

namespace vtpmd {

namespace {

void check_dims(const Matrix& x, const Matrix& w, const Vector& a) {
  if (x.cols() != a.size() || w.rows() != a.size()) {
    throw DimensionMismatch("scorefit: need X.cols == len(a) == W.rows");
  }
}

Matrix scale_cols(const Matrix& x, const Vector& a) {
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] *= a[j];
  }
  return out;
}

// M = (X^T X) o (W W^T), the Hessian of the smooth part up to a factor
// of two: ||X diag(a) W - X W||^2 = (a-1)^T M (a-1).
Matrix quadratic_form(const Matrix& x, const Matrix& w) {
  const Matrix gram_x = matmul(transpose(x), x);
  const Matrix gram_w = matmul(w, transpose(w));
  Matrix m(gram_x.rows(), gram_x.cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m.data()[i] = gram_x.data()[i] * gram_w.data()[i];
  }
  return m;
}

double lambda_max_estimate(const Matrix& m) {
  const std::size_t d = m.rows();
  Vector v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vector mv = matvec(m, v);
    const double nrm = norm2(mv);
    if (nrm == 0.0) return 0.0;
    for (std::size_t i = 0; i < d; ++i) v[i] = mv[i] / nrm;
    lambda = nrm;
  }
  return lambda;
}

}  // namespace

double objective(const Matrix& x, const Matrix& w, const Vector& a,
                 double lambda) {
  check_dims(x, w, a);
  const Matrix err = sub(matmul(scale_cols(x, a), w), matmul(x, w));
  const double fro = frobenius_norm(err);
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i]);
  return fro * fro + lambda * l1;
}

Vector grad_a(const Matrix& x, const Matrix& w, const Vector& a) {
  check_dims(x, w, a);
  const Matrix err = sub(matmul(scale_cols(x, a), w), matmul(x, w));
  const Matrix xte = matmul(transpose(x), err);  // d x n
  Vector g(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) sum += xte(i, j) * w(i, j);
    g[i] = 2.0 * sum;
  }
  return g;
}

Vector prox_l1(const Vector& v, double t) {
  if (t < 0.0) throw Error("prox_l1: t must be nonnegative");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]) - t;
    out[i] = mag > 0.0 ? (v[i] > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

FitResult fit_scores(const Matrix& w, const FitConfig& cfg,
                     const std::string& layer_id) {
  if (cfg.iters == 0) throw Error("fit_scores: iters must be >= 1");
  if (cfg.step && !(*cfg.step > 0.0)) {
    throw Error("fit_scores: step must be positive");
  }
  if (cfg.calib.cols() != w.rows()) {
    throw DimensionMismatch("fit_scores: calib.cols != W.rows");
  }
  if (cfg.lambda < 0.0) throw Error("fit_scores: lambda must be >= 0");

  const std::size_t d = w.rows();
  const Matrix m = quadratic_form(cfg.calib, w);
  double eta;
  if (cfg.step) {
    eta = *cfg.step;
  } else {
    const double lmax = lambda_max_estimate(m);
    eta = lmax > 0.0 ? 1.0 / (2.0 * lmax) : 1.0;
  }

  // Smooth part and gradient through the d x d quadratic form; identical
  // to the definitional objective/grad_a up to rounding.
  auto smooth = [&](const Vector& a) {
    double val = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += m(i, j) * (a[j] - 1.0);
      val += (a[i] - 1.0) * row;
    }
    return val;
  };
  auto total = [&](const Vector& a) {
    double l1 = 0.0;
    for (std::size_t i = 0; i < d; ++i) l1 += std::abs(a[i]);
    return smooth(a) + cfg.lambda * l1;
  };

  Vector a(d, 1.0);
  double obj = total(a);
  FitResult result;
  result.objective_trace.push_back(obj);

  int rejected_in_a_row = 0;
  for (std::size_t it = 0; it < cfg.iters; ++it) {
    Vector g(d);
    for (std::size_t i = 0; i < d; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < d; ++j) row += m(i, j) * (a[j] - 1.0);
      g[i] = 2.0 * row;
    }
    Vector step(d);
    for (std::size_t i = 0; i < d; ++i) step[i] = a[i] - eta * g[i];
    Vector cand = prox_l1(step, eta * cfg.lambda);
    const double cand_obj = total(cand);
    if (cand_obj <= obj) {
      a = std::move(cand);
      obj = cand_obj;
      result.objective_trace.push_back(obj);
      rejected_in_a_row = 0;
    } else if (cand_obj <= obj + 1e-9 * std::abs(obj)) {
      // No representable progress left: converged, not diverging.
      break;
    } else {
      eta /= 2.0;
      if (++rejected_in_a_row >= 10) {
        throw DivergenceDetected("fit_scores: objective grew for 10 "
                                 "consecutive steps despite halving");
      }
    }
  }

  result.scores = ImportanceScores{std::move(a), cfg.lambda, layer_id};
  result.final_step = eta;
  return result;
}

}  // namespace vtpmd
