#include "zofed/problem.hpp"

#include <numeric>

namespace zofed {

Matrix StochasticProblem::euclid_grad(const Matrix&, std::span<const int>) const {
  throw MissingExactGradient("problem does not expose an exact gradient");
}

std::vector<double> StochasticProblem::partition_keys() const {
  // Default: sample index order.
  std::vector<double> keys(num_samples());
  std::iota(keys.begin(), keys.end(), 0.0);
  return keys;
}

std::vector<int> StochasticProblem::all_indices() const {
  std::vector<int> idx(num_samples());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

ShardOracle::ShardOracle(const StochasticProblem& problem, std::vector<int> shard, int batch_size)
    : problem_(problem), shard_(std::move(shard)), batch_size_(batch_size) {
  if (shard_.empty()) throw ConfigError("ShardOracle: empty shard");
  if (batch_size_ < 0) throw ConfigError("ShardOracle: negative batch size");
}

double ShardOracle::do_eval(const Matrix& point, RngStream stream) const {
  if (batch_size_ == 0 || batch_size_ >= static_cast<int>(shard_.size())) {
    return problem_.value(point, shard_);
  }
  std::vector<int> batch(batch_size_);
  for (int& b : batch) b = shard_[stream.next_below(shard_.size())];
  return problem_.value(point, batch);
}

Matrix ShardOracle::exact_euclid_grad(const Matrix& point) const {
  return problem_.euclid_grad(point, shard_);
}

}  // namespace zofed
