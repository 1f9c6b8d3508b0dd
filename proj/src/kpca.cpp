#include "zofed/kpca.hpp"

#include <cmath>
#include <string>

namespace zofed {

KpcaProblem::KpcaProblem(std::vector<Matrix> h, int r)
    : h_(std::move(h)), manifold_(ManifoldKind::stiefel(h_.front().rows(), r)) {}

KpcaProblem KpcaProblem::from_covariances(std::vector<Matrix> h, int r) {
  if (h.empty()) throw ConfigError("kpca: need at least one covariance matrix");
  const int p = h.front().rows();
  for (size_t j = 0; j < h.size(); ++j) {
    const Matrix& m = h[j];
    if (m.rows() != p || m.cols() != p) throw DimensionMismatch("kpca: H_j must be square p x p");
    const Matrix asym = m - m.transposed();
    if (asym.norm() > 1e-12 * std::max(1.0, m.norm())) {
      throw ConfigError("kpca: H_" + std::to_string(j) + " is not symmetric");
    }
  }
  return KpcaProblem(std::move(h), r);
}

KpcaProblem KpcaProblem::from_samples(const Matrix& samples, int r) {
  if (samples.rows() < 1) throw ConfigError("kpca: empty sample table");
  const int p = samples.cols();
  std::vector<Matrix> h;
  h.reserve(samples.rows());
  for (int n = 0; n < samples.rows(); ++n) {
    Matrix hj(p, p);
    for (int i = 0; i < p; ++i) {
      for (int j = i; j < p; ++j) {
        const double v = samples(n, i) * samples(n, j);
        hj(i, j) = v;
        hj(j, i) = v;  // symmetric bit-for-bit by construction
      }
    }
    h.push_back(std::move(hj));
  }
  return KpcaProblem(std::move(h), r);
}

double KpcaProblem::value(const Matrix& x, std::span<const int> sample_indices) const {
  if (sample_indices.empty()) throw ConfigError("kpca value: empty index set");
  long double acc = 0.0L;
  for (int j : sample_indices) {
    if (j < 0 || j >= num_samples()) throw ConfigError("kpca value: index out of range");
    acc += dot(x, matmul(h_[static_cast<size_t>(j)], x));
  }
  return static_cast<double>(-acc / (2.0L * static_cast<long double>(sample_indices.size())));
}

Matrix KpcaProblem::euclid_grad(const Matrix& x, std::span<const int> sample_indices) const {
  if (sample_indices.empty()) throw ConfigError("kpca grad: empty index set");
  Matrix g(x.rows(), x.cols());
  for (int j : sample_indices) {
    if (j < 0 || j >= num_samples()) throw ConfigError("kpca grad: index out of range");
    g += matmul(h_[static_cast<size_t>(j)], x);
  }
  g *= -1.0 / static_cast<double>(sample_indices.size());
  return g;
}

std::pair<double, Matrix> KpcaProblem::reference_optimum() const {
  const int p = dim();
  Matrix mean(p, p);
  for (const Matrix& hj : h_) mean += hj;
  mean *= 1.0 / static_cast<double>(num_samples());

  const SymEig eig = sym_eig(mean);
  const int r = components();
  double top = 0.0;
  Matrix x_star(p, r);
  for (int j = 0; j < r; ++j) {
    top += eig.values[j];
    for (int i = 0; i < p; ++i) x_star(i, j) = eig.vectors(i, j);
  }
  return {-0.5 * top, x_star};
}

std::optional<double> KpcaProblem::reference_value() const { return reference_optimum().first; }

std::vector<double> KpcaProblem::partition_keys() const {
  // Score each sample by the leading eigenvector of the average covariance:
  // key_j = v1ᵀ H_j v1. Clusters separate cleanly under this ordering.
  const int p = dim();
  Matrix mean(p, p);
  for (const Matrix& hj : h_) mean += hj;
  mean *= 1.0 / static_cast<double>(num_samples());
  const SymEig eig = sym_eig(mean);
  Matrix v1(p, 1);
  for (int i = 0; i < p; ++i) v1(i, 0) = eig.vectors(i, 0);

  std::vector<double> keys;
  keys.reserve(h_.size());
  for (const Matrix& hj : h_) keys.push_back(dot(v1, matmul(hj, v1)));
  return keys;
}

SyntheticBlobs make_synthetic_blobs(int n_samples, int dim, int clusters, double scale,
                                    RngStream stream) {
  if (n_samples < 1 || dim < 1 || clusters < 1) throw ConfigError("blobs: invalid sizes");

  // One dominant direction per cluster plus an isotropic floor.
  std::vector<Matrix> axes;
  axes.reserve(clusters);
  RngStream axis_stream = stream.spawn(0);
  for (int c = 0; c < clusters; ++c) {
    axes.push_back(sample_unit_sphere(axis_stream, dim, 1));
  }

  SyntheticBlobs out;
  out.samples = Matrix(n_samples, dim);
  out.cluster_ids.resize(n_samples);
  RngStream draw = stream.spawn(1);
  for (int n = 0; n < n_samples; ++n) {
    const int c = n % clusters;
    out.cluster_ids[n] = static_cast<double>(c);
    const double along = scale * draw.next_gaussian();
    for (int d = 0; d < dim; ++d) {
      out.samples(n, d) = along * axes[c](d, 0) + 0.3 * draw.next_gaussian();
    }
  }
  return out;
}

}  // namespace zofed
