#include "zofed/lowrank.hpp"

namespace zofed {

LowRankRegressionProblem::LowRankRegressionProblem(std::vector<Matrix> designs,
                                                   std::vector<double> targets, Matrix truth,
                                                   ManifoldKind manifold)
    : designs_(std::move(designs)),
      targets_(std::move(targets)),
      truth_(std::move(truth)),
      manifold_(std::move(manifold)) {}

LowRankRegressionProblem LowRankRegressionProblem::synthetic(int p, int r, int rank, int n_samples,
                                                             double noise_sigma, double gamma,
                                                             RngStream stream) {
  if (n_samples < 1) throw ConfigError("lowrank: need at least one sample");
  const ManifoldKind manifold = ManifoldKind::fixed_rank(p, r, rank, gamma);

  // Ground truth: product of two Gaussian factors, rank R almost surely.
  RngStream truth_stream = stream.spawn(0);
  const Matrix left = sample_gaussian(truth_stream, p, rank);
  const Matrix right = sample_gaussian(truth_stream, rank, r);
  Matrix truth = matmul(left, right);
  truth *= 1.0 / std::max(1.0, truth.norm());

  RngStream draw = stream.spawn(1);
  std::vector<Matrix> designs;
  std::vector<double> targets;
  designs.reserve(n_samples);
  targets.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    Matrix a = sample_gaussian(draw, p, r);
    const double y = dot(a, truth) + noise_sigma * draw.next_gaussian();
    designs.push_back(std::move(a));
    targets.push_back(y);
  }
  return LowRankRegressionProblem(std::move(designs), std::move(targets), std::move(truth),
                                  manifold);
}

double LowRankRegressionProblem::value(const Matrix& x, std::span<const int> sample_indices) const {
  if (sample_indices.empty()) throw ConfigError("lowrank value: empty index set");
  long double acc = 0.0L;
  for (int s : sample_indices) {
    if (s < 0 || s >= num_samples()) throw ConfigError("lowrank value: index out of range");
    const double res = dot(designs_[static_cast<size_t>(s)], x) - targets_[static_cast<size_t>(s)];
    acc += static_cast<long double>(res) * res;
  }
  return static_cast<double>(acc / sample_indices.size());
}

Matrix LowRankRegressionProblem::euclid_grad(const Matrix& x,
                                             std::span<const int> sample_indices) const {
  if (sample_indices.empty()) throw ConfigError("lowrank grad: empty index set");
  Matrix g(x.rows(), x.cols());
  for (int s : sample_indices) {
    if (s < 0 || s >= num_samples()) throw ConfigError("lowrank grad: index out of range");
    const Matrix& a = designs_[static_cast<size_t>(s)];
    const double res = dot(a, x) - targets_[static_cast<size_t>(s)];
    for (int k = 0; k < g.size(); ++k) g[k] += 2.0 * res * a[k];
  }
  g *= 1.0 / static_cast<double>(sample_indices.size());
  return g;
}

std::vector<double> LowRankRegressionProblem::partition_keys() const { return targets_; }

}  // namespace zofed
