#include "zofed/matrix.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace zofed {
namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const EigenRowMajor>;
using Map = Eigen::Map<EigenRowMajor>;

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  }
}

}  // namespace

Matrix::Matrix(int rows, int cols)
    : rows_(rows), cols_(cols), e_(static_cast<size_t>(rows) * cols, 0.0) {
  if (rows < 0 || cols < 0) throw DimensionMismatch("Matrix: negative dimension");
}

Matrix::Matrix(int rows, int cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), e_(std::move(entries)) {
  if (rows < 0 || cols < 0) throw DimensionMismatch("Matrix: negative dimension");
  if (e_.size() != static_cast<size_t>(rows) * cols) {
    throw DimensionMismatch("Matrix: entries.size() != rows*cols");
  }
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  require_same_shape(*this, o, "operator+=");
  for (size_t k = 0; k < e_.size(); ++k) e_[k] += o.e_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  require_same_shape(*this, o, "operator-=");
  for (size_t k = 0; k < e_.size(); ++k) e_[k] -= o.e_[k];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& x : e_) x *= s;
  return *this;
}

double Matrix::norm() const {
  long double acc = 0.0L;
  for (double x : e_) acc += static_cast<long double>(x) * x;
  return static_cast<double>(std::sqrt(acc));
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double x : e_) m = std::max(m, std::fabs(x));
  return m;
}

bool Matrix::is_finite() const {
  for (double x : e_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Matrix::require_finite(const char* what) const {
  if (!is_finite()) throw NumericalFailure(std::string(what) + ": non-finite entries");
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix operator+(Matrix a, const Matrix& b) {
  a += b;
  return a;
}

Matrix operator-(Matrix a, const Matrix& b) {
  a -= b;
  return a;
}

Matrix operator*(double s, Matrix a) {
  a *= s;
  return a;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  Map(c.data(), c.rows(), c.cols()) =
      MapConst(a.data(), a.rows(), a.cols()) * MapConst(b.data(), b.rows(), b.cols());
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("matmul_tn: inner dimensions differ");
  Matrix c(a.cols(), b.cols());
  Map(c.data(), c.rows(), c.cols()) =
      MapConst(a.data(), a.rows(), a.cols()).transpose() * MapConst(b.data(), b.rows(), b.cols());
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("matmul_nt: inner dimensions differ");
  Matrix c(a.rows(), b.rows());
  Map(c.data(), c.rows(), c.cols()) =
      MapConst(a.data(), a.rows(), a.cols()) * MapConst(b.data(), b.rows(), b.cols()).transpose();
  return c;
}

double dot(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "dot");
  long double acc = 0.0L;
  const double* pa = a.data();
  const double* pb = b.data();
  for (int k = 0; k < a.size(); ++k) acc += static_cast<long double>(pa[k]) * pb[k];
  return static_cast<double>(acc);
}

}  // namespace zofed
