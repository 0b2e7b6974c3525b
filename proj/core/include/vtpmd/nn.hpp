#pragma once

#include "vtpmd/matrix.hpp"

namespace vtpmd {

// Row-wise softmax with per-row max subtraction so extreme magnitudes
// cannot overflow. Every output row is nonnegative and sums to 1.
Matrix softmax_rows(const Matrix& a);

// Per-row standardization (population variance) followed by the affine
// gamma/beta map. gamma and beta must have length a.cols; eps > 0.
Matrix layer_norm_rows(const Matrix& a, const Vector& gamma,
                       const Vector& beta, double eps = 1e-5);

// Elementwise GELU, tanh approximation.
Matrix gelu(const Matrix& a);
double gelu_scalar(double x);

}  // namespace vtpmd
