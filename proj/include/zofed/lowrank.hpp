#pragma once

#include <vector>

#include "zofed/problem.hpp"

namespace zofed {

// Fixed-rank least-squares regression analog: per-sample design matrices a_s
// and scalar targets y_s,
//
//   value(x, S) = (1/|S|) * sum_{s in S} (⟨a_s, x⟩ - y_s)^2,
//
// with x constrained to matrices of rank exactly R. Instances are generated
// from a ground-truth rank-R matrix plus observation noise.
class LowRankRegressionProblem : public StochasticProblem {
 public:
  static LowRankRegressionProblem synthetic(int p, int r, int rank, int n_samples,
                                            double noise_sigma, double gamma, RngStream stream);

  const ManifoldKind& manifold() const override { return manifold_; }
  int num_samples() const override { return static_cast<int>(targets_.size()); }

  double value(const Matrix& x, std::span<const int> sample_indices) const override;
  Matrix euclid_grad(const Matrix& x, std::span<const int> sample_indices) const override;
  bool has_exact_gradient() const override { return true; }

  // Sort key = target value; heterogeneous shards group similar responses.
  std::vector<double> partition_keys() const override;

  const Matrix& ground_truth() const { return truth_; }
  const Matrix& design(int s) const { return designs_[static_cast<size_t>(s)]; }
  double target(int s) const { return targets_[static_cast<size_t>(s)]; }

 private:
  LowRankRegressionProblem(std::vector<Matrix> designs, std::vector<double> targets, Matrix truth,
                           ManifoldKind manifold);

  std::vector<Matrix> designs_;
  std::vector<double> targets_;
  Matrix truth_;
  ManifoldKind manifold_;
};

}  // namespace zofed
