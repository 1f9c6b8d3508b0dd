#pragma once

#include <string>
#include <vector>

namespace zofed {

struct SelftestResult {
  std::string name;
  bool pass = false;
  std::string detail;  // failure explanation, empty on pass
};

// Runs the full invariant suite (manifold properties, estimator identities,
// correction algebra, determinism, partitions). `inject_failure` appends a
// deliberately failing fixture used to exercise failure reporting.
std::vector<SelftestResult> run_selftest(uint64_t seed, bool inject_failure = false);

}  // namespace zofed
