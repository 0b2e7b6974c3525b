#include "vtpmd/nn.hpp"

#include <cmath>

#include "vtpmd/errors.hpp"

namespace vtpmd {

Matrix softmax_rows(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* src = a.row_ptr(i);
    double* dst = out.row_ptr(i);
    double maxv = src[0];
    for (std::size_t j = 1; j < a.cols(); ++j) maxv = std::max(maxv, src[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      dst[j] = std::exp(src[j] - maxv);
      sum += dst[j];
    }
    for (std::size_t j = 0; j < a.cols(); ++j) dst[j] /= sum;
  }
  return out;
}

Matrix layer_norm_rows(const Matrix& a, const Vector& gamma,
                       const Vector& beta, double eps) {
  if (gamma.size() != a.cols() || beta.size() != a.cols()) {
    throw DimensionMismatch("layer_norm_rows: gamma/beta length != cols");
  }
  if (!(eps > 0.0)) {
    throw Error("layer_norm_rows: eps must be positive");
  }
  Matrix out(a.rows(), a.cols());
  const double n = static_cast<double>(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* src = a.row_ptr(i);
    double* dst = out.row_ptr(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) mean += src[j];
    mean /= n;
    double var = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double d = src[j] - mean;
      var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      dst[j] = (src[j] - mean) * inv * gamma[j] + beta[j];
    }
  }
  return out;
}

double gelu_scalar(double x) {
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  return 0.5 * x * (1.0 + std::tanh(kSqrt2OverPi * (x + 0.044715 * x * x * x)));
}

Matrix gelu(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.data()[i] = gelu_scalar(a.data()[i]);
  }
  return out;
}

}  // namespace vtpmd
