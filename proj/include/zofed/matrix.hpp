#pragma once

#include <cstddef>
#include <vector>

#include "zofed/errors.hpp"

namespace zofed {

// Dense real matrix, row-major storage. The ambient representation of all
// points, gradients and perturbations. Problem sizes in scope never need
// sparse or blocked kernels.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols);  // zero-initialized
  Matrix(int rows, int cols, std::vector<double> entries);

  static Matrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return rows_ * cols_; }

  double& operator()(int i, int j) { return e_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return e_[static_cast<size_t>(i) * cols_ + j]; }

  // Flat row-major access.
  double& operator[](int k) { return e_[static_cast<size_t>(k)]; }
  double operator[](int k) const { return e_[static_cast<size_t>(k)]; }

  double* data() { return e_.data(); }
  const double* data() const { return e_.data(); }

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  double norm() const;  // Frobenius
  double max_abs() const;
  bool is_finite() const;
  void require_finite(const char* what) const;  // throws NumericalFailure

  Matrix transposed() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> e_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double s, Matrix a);

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // aᵀ * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * bᵀ

// Frobenius inner product ⟨a, b⟩ = Tr(aᵀ b).
double dot(const Matrix& a, const Matrix& b);

}  // namespace zofed
