#include "zofed/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "zofed/errors.hpp"

namespace zofed {
namespace {

std::vector<int> shuffled_indices(int n, RngStream& stream) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(stream.next_below(static_cast<uint64_t>(i) + 1));
    std::swap(idx[i], idx[j]);
  }
  return idx;
}

// Marsaglia-Tsang gamma sampler.
double sample_gamma(double alpha, RngStream& stream) {
  if (alpha < 1.0) {
    const double u = std::max(stream.next_uniform(), 1e-300);
    return sample_gamma(alpha + 1.0, stream) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = stream.next_gaussian();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = std::max(stream.next_uniform(), 1e-300);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

Partition deal_equal(std::vector<int> order, int n_clients, int per_client) {
  Partition p;
  p.assignment.resize(n_clients);
  int pos = 0;
  for (int c = 0; c < n_clients; ++c) {
    p.assignment[c].assign(order.begin() + pos, order.begin() + pos + per_client);
    pos += per_client;
  }
  p.dropped.assign(order.begin() + pos, order.end());
  return p;
}

}  // namespace

namespace {

// Shards are index sets; the sorted form is canonical so that downstream
// minibatch draws do not depend on dealing order.
Partition canonicalize(Partition p) {
  for (auto& shard : p.assignment) std::sort(shard.begin(), shard.end());
  std::sort(p.dropped.begin(), p.dropped.end());
  return p;
}

}  // namespace

Partition partition_dataset(int n_samples, int n_clients, const PartitionConfig& cfg,
                            RngStream stream, const std::vector<double>* sort_keys) {
  if (n_clients < 1) throw ConfigError("partition: need at least one client");
  if (n_clients > n_samples) throw ConfigError("partition: more clients than samples");

  switch (cfg.scheme) {
    case PartitionScheme::IID: {
      return canonicalize(
          deal_equal(shuffled_indices(n_samples, stream), n_clients, n_samples / n_clients));
    }

    case PartitionScheme::SortedShards: {
      if (cfg.shards_per_client < 1) throw ConfigError("partition: shards_per_client must be >= 1");
      if (sort_keys == nullptr || static_cast<int>(sort_keys->size()) != n_samples) {
        throw ConfigError("partition: sorted shards require one sort key per sample");
      }
      const int total_shards = cfg.shards_per_client * n_clients;
      const int shard_size = n_samples / total_shards;
      if (shard_size < 1) throw ConfigError("partition: too many shards for the dataset");

      std::vector<int> order(n_samples);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return (*sort_keys)[a] < (*sort_keys)[b]; });

      // Deal whole contiguous shards to clients in a random order.
      const std::vector<int> shard_of = shuffled_indices(total_shards, stream);
      Partition p;
      p.assignment.resize(n_clients);
      for (int s = 0; s < total_shards; ++s) {
        const int client = s / cfg.shards_per_client;
        const int shard = shard_of[s];
        p.assignment[client].insert(p.assignment[client].end(),
                                    order.begin() + static_cast<long>(shard) * shard_size,
                                    order.begin() + static_cast<long>(shard + 1) * shard_size);
      }
      p.dropped.assign(order.begin() + static_cast<long>(total_shards) * shard_size, order.end());
      return canonicalize(std::move(p));
    }

    case PartitionScheme::Dirichlet: {
      if (cfg.alpha <= 0.0) throw ConfigError("partition: dirichlet alpha must be positive");
      std::vector<double> weights(n_clients);
      double total = 0.0;
      for (double& w : weights) {
        w = sample_gamma(cfg.alpha, stream);
        total += w;
      }

      // Largest-remainder rounding so sizes cover every sample exactly.
      std::vector<int> sizes(n_clients);
      std::vector<std::pair<double, int>> remainders(n_clients);
      int assigned = 0;
      for (int c = 0; c < n_clients; ++c) {
        const double exact = n_samples * weights[c] / total;
        sizes[c] = static_cast<int>(std::floor(exact));
        assigned += sizes[c];
        remainders[c] = {exact - sizes[c], c};
      }
      std::sort(remainders.rbegin(), remainders.rend());
      for (int k = 0; k < n_samples - assigned; ++k) ++sizes[remainders[k].second];

      // Every client needs at least one sample to define a local objective.
      for (int c = 0; c < n_clients; ++c) {
        while (sizes[c] == 0) {
          const int donor =
              static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
          --sizes[donor];
          ++sizes[c];
        }
      }

      const std::vector<int> order = shuffled_indices(n_samples, stream);
      Partition p;
      p.assignment.resize(n_clients);
      int pos = 0;
      for (int c = 0; c < n_clients; ++c) {
        p.assignment[c].assign(order.begin() + pos, order.begin() + pos + sizes[c]);
        pos += sizes[c];
      }
      return canonicalize(std::move(p));
    }
  }
  throw Error("partition_dataset: unreachable");
}

}  // namespace zofed
