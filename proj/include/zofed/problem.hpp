#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "zofed/manifold.hpp"
#include "zofed/oracle.hpp"

namespace zofed {

// A benchmark objective of the form f(x) = mean over samples of a per-sample
// loss, evaluated over arbitrary index subsets. Implementations are immutable
// after construction and safe for concurrent evaluation.
class StochasticProblem {
 public:
  virtual ~StochasticProblem() = default;

  virtual const ManifoldKind& manifold() const = 0;
  virtual int num_samples() const = 0;

  // Mean per-sample loss over the given sample indices.
  virtual double value(const Matrix& x, std::span<const int> sample_indices) const = 0;

  // Euclidean gradient of value(); diagnostics and metrics only.
  virtual Matrix euclid_grad(const Matrix& x, std::span<const int> sample_indices) const;
  virtual bool has_exact_gradient() const { return false; }

  // Known optimal value f*, when a reference solver exists.
  virtual std::optional<double> reference_value() const { return std::nullopt; }

  // Per-sample sort keys for the sorted-shards partition scheme.
  virtual std::vector<double> partition_keys() const;

  std::vector<int> all_indices() const;
};

// F_i(x, xi): the local objective of one client, evaluated on a minibatch of
// its shard drawn uniformly with replacement from the evaluation stream.
// batch_size == 0 evaluates the full shard deterministically.
class ShardOracle : public FunctionOracle {
 public:
  ShardOracle(const StochasticProblem& problem, std::vector<int> shard, int batch_size);

  bool has_exact_gradient() const override { return problem_.has_exact_gradient(); }
  Matrix exact_euclid_grad(const Matrix& point) const override;

  const std::vector<int>& shard() const { return shard_; }

 protected:
  double do_eval(const Matrix& point, RngStream stream) const override;

 private:
  const StochasticProblem& problem_;
  std::vector<int> shard_;
  int batch_size_;
};

}  // namespace zofed
