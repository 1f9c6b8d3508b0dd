#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "zofed/fedsim.hpp"
#include "zofed/problem.hpp"

namespace zofed {

// Flat `[section]` / `key = value` text config. Parsing is strict: after the
// consumer declares its schema, any unknown section or key is an error, so
// experiment files stay auditable.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long long get_int(const std::string& section, const std::string& key, long long fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  uint64_t get_u64(const std::string& section, const std::string& key, uint64_t fallback) const;
  std::vector<double> get_double_list(const std::string& section, const std::string& key) const;
  std::vector<long long> get_int_list(const std::string& section, const std::string& key) const;

  // Throws ConfigError naming the first section/key outside the schema.
  void require_known(const std::map<std::string, std::set<std::string>>& schema) const;

  const std::string& origin() const { return origin_; }

 private:
  std::string origin_;
  std::map<std::string, std::map<std::string, std::string>> values_;
};

// A sweepable integer run parameter: a single value or a list to sweep over.
struct SweepValues {
  std::string key;
  std::vector<int> values;
  bool is_sweep() const { return values.size() > 1; }
};

// Fully resolved experiment description: problem recipe, run parameters,
// seed list, optional sweep, probe settings and output directory. All file
// paths are validated at load time, before any computation starts.
struct ExperimentConfig {
  // [problem]
  std::string problem_kind;  // kpca | kpca_csv | attack | lowrank
  int dim = 10;
  int components = 2;
  int samples = 20;
  int clusters = 1;
  double blob_scale = 3.0;
  uint64_t data_seed = 7777;
  std::string csv_path;
  std::string attack_config;  // asset config with epsilon + pinned hashes
  std::optional<double> epsilon_override;
  double balance_c = 1.0;
  int lowrank_rank = 2;
  double noise_sigma = 0.01;
  double fixed_rank_gamma = 0.1;

  // [run]
  RunConfig run;
  std::vector<uint64_t> seeds{1};
  SweepValues clients_sweep;
  SweepValues local_steps_sweep;
  SweepValues m_sweep;
  SweepValues rank_sweep;

  // [partition]
  PartitionConfig partition;

  // [probe]
  std::vector<double> probe_mu_list{0.3, 0.1, 0.03};
  long probe_bias_samples = 100000;
  long probe_variance_repeats = 2000;
  std::vector<int> probe_variance_m{1, 10, 100};

  // [output]
  std::string out_dir = "out";

  static ExperimentConfig load(const std::string& path);

  // The at-most-one sweep parameter (ConfigError if several are lists).
  const SweepValues* active_sweep() const;

  std::unique_ptr<StochasticProblem> make_problem() const;
  std::unique_ptr<StochasticProblem> make_problem_with(int rank_override) const;

  std::vector<std::pair<std::string, std::string>> describe(const RunConfig& resolved,
                                                            uint64_t seed) const;
};

// Frozen-attack asset description (epsilon tuned once, hashes pinned).
struct AttackAssetConfig {
  std::string victim_weights;
  uint64_t weights_fnv1a = 0;
  std::string bases_csv;
  uint64_t bases_fnv1a = 0;
  double epsilon = 1.0;
  double balance_c = 1.0;

  static AttackAssetConfig load(const std::string& path);
};

}  // namespace zofed
