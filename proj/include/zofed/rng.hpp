#pragma once

#include <cstdint>
#include <vector>

#include "zofed/matrix.hpp"

namespace zofed {

// Path-keyed random stream. The generator state is a pure function of
// (master_seed, path), so two streams with the same key produce the same
// sequence bit-for-bit no matter which thread runs them or in what order
// they were spawned. Splitting follows the SplittableRandom construction:
// a SplitMix64 Weyl sequence with a per-stream odd increment.
class RngStream {
 public:
  explicit RngStream(uint64_t master_seed, std::vector<uint64_t> path = {});

  // Child stream with path = parent path ++ [index]. Does not consume from
  // the parent.
  RngStream spawn(uint64_t index) const;

  uint64_t next_u64();
  uint64_t next_below(uint64_t bound);  // unbiased integer in [0, bound)
  double next_uniform();                // [0, 1)
  double next_gaussian();               // standard normal (Box-Muller)

  uint64_t master_seed() const { return master_seed_; }
  const std::vector<uint64_t>& path() const { return path_; }

 private:
  uint64_t master_seed_ = 0;
  std::vector<uint64_t> path_;
  uint64_t state_ = 0;
  uint64_t gamma_ = 0;
};

RngStream spawn_stream(const RngStream& parent, uint64_t index);

// Matrix with i.i.d. standard normal entries, consumed from the stream in
// row-major order.
Matrix sample_gaussian(RngStream& stream, int rows, int cols);

// Uniform draw from the unit Frobenius sphere of R^{rows x cols}
// (normalized Gaussian; resamples on the measure-zero tiny-norm event).
Matrix sample_unit_sphere(RngStream& stream, int rows, int cols);

}  // namespace zofed
