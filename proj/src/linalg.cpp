#include "zofed/linalg.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

namespace zofed {
namespace {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const EigenRowMajor>;

Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < out.rows(); ++i)
    for (int j = 0; j < out.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

}  // namespace

ThinSvd thin_svd(const Matrix& a) {
  a.require_finite("thin_svd input");
  MapConst map(a.data(), a.rows(), a.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalFailure("thin_svd: solver did not converge");

  ThinSvd out;
  out.u = from_eigen(svd.matrixU());
  out.v = from_eigen(svd.matrixV());
  out.s.assign(svd.singularValues().data(), svd.singularValues().data() + svd.singularValues().size());
  out.u.require_finite("thin_svd U");
  out.v.require_finite("thin_svd V");
  for (double s : out.s) {
    if (!std::isfinite(s) || s < 0.0) throw NumericalFailure("thin_svd: invalid singular value");
  }
  return out;
}

SymEig sym_eig(const Matrix& a) {
  a.require_finite("sym_eig input");
  if (a.rows() != a.cols()) throw DimensionMismatch("sym_eig: matrix not square");
  MapConst map(a.data(), a.rows(), a.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(map);
  if (es.info() != Eigen::Success) throw NumericalFailure("sym_eig: solver did not converge");

  // Eigen returns ascending order; flip to descending.
  const int n = a.rows();
  SymEig out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (int j = 0; j < n; ++j) {
    const int src = n - 1 - j;
    out.values[j] = es.eigenvalues()(src);
    for (int i = 0; i < n; ++i) out.vectors(i, j) = es.eigenvectors()(i, src);
  }
  return out;
}

Matrix thin_polar_factor(const Matrix& a, double& sigma_ratio) {
  const int p = a.rows();
  const int r = a.cols();
  if (p < r) throw DimensionMismatch("thin_polar_factor: requires rows >= cols");
  MapConst map(a.data(), p, r);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(map);
  const Eigen::MatrixXd rr =
      qr.matrixQR().topRows(r).template triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rr, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  sigma_ratio = sv(0) > 0.0 ? sv(r - 1) / sv(0) : 0.0;
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(p, r);
  q.applyOnTheLeft(qr.householderQ());
  Matrix out(p, r);
  Eigen::Map<EigenRowMajor>(out.data(), p, r) = q * (svd.matrixU() * svd.matrixV().transpose());
  out.require_finite("thin_polar_factor");
  return out;
}

Matrix spd_inverse_sqrt(const Matrix& b) {
  const SymEig eig = sym_eig(b);
  const int n = b.rows();
  for (double v : eig.values) {
    if (v <= 0.0) throw NumericalFailure("spd_inverse_sqrt: matrix not positive definite");
  }
  // Q * diag(values^{-1/2}) * Q^T
  Matrix scaled = eig.vectors;
  for (int j = 0; j < n; ++j) {
    const double f = 1.0 / std::sqrt(eig.values[j]);
    for (int i = 0; i < n; ++i) scaled(i, j) *= f;
  }
  return matmul_nt(scaled, eig.vectors);
}

}  // namespace zofed
