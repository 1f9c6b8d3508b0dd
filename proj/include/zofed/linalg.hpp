#pragma once

#include <vector>

#include "zofed/matrix.hpp"

namespace zofed {

// Thin SVD a = u * diag(s) * v^T with k = min(rows, cols) columns in u and
// v, singular values non-increasing.
struct ThinSvd {
  Matrix u;
  std::vector<double> s;
  Matrix v;
};

// Throws NumericalFailure on non-finite input or solver breakdown.
ThinSvd thin_svd(const Matrix& a);

// Eigendecomposition of a symmetric matrix, eigenvalues in descending
// order, eigenvectors as columns.
struct SymEig {
  std::vector<double> values;
  Matrix vectors;
};

SymEig sym_eig(const Matrix& a);

// B^{-1/2} for symmetric positive definite B (used by the polar retraction).
Matrix spd_inverse_sqrt(const Matrix& b);

// Orthonormal polar factor u vᵀ of the thin SVD of a tall matrix
// (rows >= cols), computed through an unpivoted QR of a and an SVD of the
// small triangular factor. sigma_ratio receives sigma_min / sigma_max.
Matrix thin_polar_factor(const Matrix& a, double& sigma_ratio);

}  // namespace zofed
