#include "zofed/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace zofed {
namespace {

constexpr uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer (variant "mix64").
uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Gamma derivation from the SplittableRandom paper: odd, with enough bit
// transitions to behave well as a Weyl increment.
uint64_t mix_gamma(uint64_t z) {
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDull;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ull;
  z = (z ^ (z >> 33)) | 1ull;
  if (std::popcount(z ^ (z >> 1)) < 24) z ^= 0xAAAAAAAAAAAAAAAAull;
  return z;
}

// Collapse (seed, path) into a single well-mixed 64-bit key.
uint64_t derive_key(uint64_t seed, const std::vector<uint64_t>& path) {
  uint64_t k = mix64(seed + kGoldenGamma);
  for (uint64_t e : path) k = mix64(k ^ mix64(e + kGoldenGamma));
  return k;
}

}  // namespace

RngStream::RngStream(uint64_t master_seed, std::vector<uint64_t> path)
    : master_seed_(master_seed), path_(std::move(path)) {
  const uint64_t key = derive_key(master_seed_, path_);
  state_ = key;
  gamma_ = mix_gamma(key + kGoldenGamma);
}

RngStream RngStream::spawn(uint64_t index) const {
  std::vector<uint64_t> child_path = path_;
  child_path.push_back(index);
  return RngStream(master_seed_, std::move(child_path));
}

uint64_t RngStream::next_u64() {
  state_ += gamma_;
  return mix64(state_);
}

uint64_t RngStream::next_below(uint64_t bound) {
  // Lemire's unbiased bounded generation.
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
  auto lo = static_cast<uint64_t>(m);
  if (lo < bound) {
    const uint64_t threshold = (0 - bound) % bound;
    while (lo < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * bound;
      lo = static_cast<uint64_t>(m);
    }
  }
  return static_cast<uint64_t>(m >> 64);
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_gaussian() {
  // Box-Muller, cosine branch only; u1 in (0,1] so the log is finite.
  const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream spawn_stream(const RngStream& parent, uint64_t index) { return parent.spawn(index); }

Matrix sample_gaussian(RngStream& stream, int rows, int cols) {
  Matrix m(rows, cols);
  for (int k = 0; k < m.size(); ++k) m[k] = stream.next_gaussian();
  return m;
}

Matrix sample_unit_sphere(RngStream& stream, int rows, int cols) {
  for (;;) {
    Matrix m = sample_gaussian(stream, rows, cols);
    const double n = m.norm();
    if (n < 1e-12) continue;  // probability ~0; keeps the unit-norm postcondition unconditional
    m *= 1.0 / n;
    return m;
  }
}

}  // namespace zofed
