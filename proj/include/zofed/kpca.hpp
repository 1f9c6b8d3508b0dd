#pragma once

#include <utility>
#include <vector>

#include "zofed/problem.hpp"

namespace zofed {

// Trace maximization over orthonormal frames, written as minimization:
//
//   f(x) = -(1/2N) * sum_j Tr(xᵀ H_j x),   x in St(p, r)
//
// with symmetric H_j. The reference optimum is the spectral solution of the
// averaged matrix.
class KpcaProblem : public StochasticProblem {
 public:
  // Validates symmetry of every H_j (relative residual <= 1e-12).
  static KpcaProblem from_covariances(std::vector<Matrix> h, int r);
  // H_j = h_j h_jᵀ from the rows of a samples matrix (N x p).
  static KpcaProblem from_samples(const Matrix& samples, int r);

  const ManifoldKind& manifold() const override { return manifold_; }
  int num_samples() const override { return static_cast<int>(h_.size()); }

  double value(const Matrix& x, std::span<const int> sample_indices) const override;
  Matrix euclid_grad(const Matrix& x, std::span<const int> sample_indices) const override;
  bool has_exact_gradient() const override { return true; }

  std::optional<double> reference_value() const override;

  // (f*, x*) from the eigendecomposition of mean(H_j): f* = -(sum of top-r
  // eigenvalues)/2, x* the corresponding eigenvectors.
  std::pair<double, Matrix> reference_optimum() const;

  // Sort key = leading principal-component score of each sample's H_j.
  std::vector<double> partition_keys() const override;

  const Matrix& covariance(int j) const { return h_[j]; }
  int dim() const { return manifold_.rows(); }
  int components() const { return manifold_.cols(); }

 private:
  KpcaProblem(std::vector<Matrix> h, int r);

  std::vector<Matrix> h_;
  ManifoldKind manifold_;
};

// Synthetic sample table for desk-scale experiments: `clusters` Gaussian
// blobs in dimension `dim` with anisotropic, per-cluster orientations, so
// sorting by cluster id yields heterogeneous shards. Returns the N x dim
// sample matrix and one cluster id per sample.
struct SyntheticBlobs {
  Matrix samples;
  std::vector<double> cluster_ids;
};

SyntheticBlobs make_synthetic_blobs(int n_samples, int dim, int clusters, double scale,
                                    RngStream stream);

}  // namespace zofed
