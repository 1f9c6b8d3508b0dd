#pragma once

#include <string>
#include <vector>

#include "zofed/problem.hpp"

namespace zofed {

// Frozen linear softmax victim. Loaded from a CSV asset whose first column is
// the class index, second the bias, followed by the weight row; the file hash
// must match the pinned value so the classifier can never drift.
class LinearVictim {
 public:
  static LinearVictim load(const std::string& weights_csv, uint64_t expected_fnv1a);
  static LinearVictim from_weights(Matrix weights, std::vector<double> bias);

  int dim() const { return weights_.cols(); }
  int classes() const { return weights_.rows(); }

  std::vector<double> logits(std::span<const double> x) const;
  int predict(std::span<const double> x) const;

  const Matrix& weights() const { return weights_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  LinearVictim(Matrix weights, std::vector<double> bias);

  Matrix weights_;  // classes x dim
  std::vector<double> bias_;
};

// Black-box attack surrogate on the unit sphere: a single perturbation
// direction delta (||delta|| = 1, scaled by the distortion budget epsilon)
// is optimized to misclassify a set of base inputs:
//
//   value(delta, S) = c * mean_{j in S} max(0, z_true(x_j + eps*delta) -
//                     max_{k != true} z_k(x_j + eps*delta)) + eps^2
//
// The eps^2 distortion term is constant on the sphere; the margin term hits
// zero exactly when the victim is confidently fooled.
class SphereAttackProblem : public StochasticProblem {
 public:
  SphereAttackProblem(LinearVictim victim, Matrix bases, std::vector<int> labels, double epsilon,
                      double balance_c);

  const ManifoldKind& manifold() const override { return manifold_; }
  int num_samples() const override { return bases_.rows(); }

  double value(const Matrix& delta, std::span<const int> sample_indices) const override;
  // Piecewise-linear loss; returns a subgradient (diagnostics only).
  Matrix euclid_grad(const Matrix& delta, std::span<const int> sample_indices) const override;
  bool has_exact_gradient() const override { return true; }

  // Fraction of base inputs whose prediction flips at base + eps*delta.
  double flip_rate(const Matrix& delta) const;

  double epsilon() const { return epsilon_; }
  const LinearVictim& victim() const { return victim_; }

 private:
  LinearVictim victim_;
  Matrix bases_;  // n_bases x dim
  std::vector<int> labels_;
  double epsilon_;
  double balance_c_;
  ManifoldKind manifold_;
};

}  // namespace zofed
