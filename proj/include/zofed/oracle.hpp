#pragma once

#include <atomic>
#include <cstdint>

#include "zofed/matrix.hpp"
#include "zofed/rng.hpp"

namespace zofed {

enum class EstimatorVariant { Projection, RetractionPolar };

// Zeroth-order estimator parameters: smoothing radius mu, batch size m, and
// which estimator to build.
struct SmoothingConfig {
  double mu = 1e-4;
  int m = 1;
  EstimatorVariant variant = EstimatorVariant::Projection;
};

// Noisy function-value oracle F(x, xi). The stream is taken by value so that
// two evaluations started from the same stream state see the same sample xi
// (paired differences). Evaluations are deterministic given (point, stream)
// and safe to run concurrently.
//
// The exact Euclidean gradient, when available, exists for diagnostics and
// convergence metrics only; optimization paths never call it.
class FunctionOracle {
 public:
  virtual ~FunctionOracle() = default;

  double eval(const Matrix& point, RngStream stream) const {
    evals_.fetch_add(1, std::memory_order_relaxed);
    return do_eval(point, std::move(stream));
  }

  virtual bool has_exact_gradient() const { return false; }
  virtual Matrix exact_euclid_grad(const Matrix& point) const;

  // Cumulative number of eval() calls (across threads).
  long long eval_count() const { return evals_.load(std::memory_order_relaxed); }

 protected:
  virtual double do_eval(const Matrix& point, RngStream stream) const = 0;

 private:
  mutable std::atomic<long long> evals_{0};
};

}  // namespace zofed
