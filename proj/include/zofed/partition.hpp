#pragma once

#include <vector>

#include "zofed/rng.hpp"

namespace zofed {

enum class PartitionScheme { IID, SortedShards, Dirichlet };

struct PartitionConfig {
  PartitionScheme scheme = PartitionScheme::IID;
  int shards_per_client = 2;  // SortedShards
  double alpha = 0.5;         // Dirichlet concentration
};

// Client -> sample indices. IID and SortedShards deal equal-size shards and
// drop the remainder (kept in `dropped`); Dirichlet covers every sample with
// heterogeneous sizes.
struct Partition {
  std::vector<std::vector<int>> assignment;
  std::vector<int> dropped;

  int n_clients() const { return static_cast<int>(assignment.size()); }
};

// sort_keys are required for SortedShards (samples are ordered by key before
// contiguous shards are dealt) and ignored otherwise.
Partition partition_dataset(int n_samples, int n_clients, const PartitionConfig& cfg,
                            RngStream stream, const std::vector<double>* sort_keys = nullptr);

}  // namespace zofed
