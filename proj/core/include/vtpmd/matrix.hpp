#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace vtpmd {

// Dense vector of 64-bit reals. The validating constructors reject
// non-finite elements; kernels that fill a default-constructed vector
// element by element are responsible for keeping it finite.
class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t len) : data_(len, 0.0) {}
  Vector(std::size_t len, double fill) : data_(len, fill) {}
  explicit Vector(std::vector<double> data);
  Vector(std::initializer_list<double> values);

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  const double* begin() const { return data_.data(); }
  const double* end() const { return data_.data() + data_.size(); }

  bool operator==(const Vector& other) const = default;

 private:
  std::vector<double> data_;
};

// Dense row-major matrix of 64-bit reals. Degenerate 0-row / 0-column
// shapes are allowed; they arise as factor blocks of rank-0 inputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }

  const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
  double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Vector row(std::size_t i) const;
  Vector col(std::size_t j) const;
  Matrix block(std::size_t row0, std::size_t col0, std::size_t nrows,
               std::size_t ncols) const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C[i][j] = sum_k A[i][k] * B[k][j]. Throws DimensionMismatch unless
// A.cols == B.rows.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

double frobenius_norm(const Matrix& a);

// Elementwise helpers shared by every higher module.
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double c);

Vector matvec(const Matrix& a, const Vector& x);
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
Vector vsub(const Vector& a, const Vector& b);

}  // namespace vtpmd
