#include "zofed/config.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "zofed/attack.hpp"
#include "zofed/csv.hpp"
#include "zofed/kpca.hpp"
#include "zofed/lowrank.hpp"

namespace zofed {
namespace {

namespace fs = std::filesystem;

std::string trim_copy(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim_copy(item));
  return out;
}

double to_double(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + s + "' is not a number for key " + what);
  }
}

long long to_int(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(s, &pos, 0);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + s + "' is not an integer for key " + what);
  }
}

uint64_t to_u64(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    const uint64_t v = std::stoull(s, &pos, 0);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + s + "' is not an unsigned integer for key " + what);
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw IoError(what + ": file not found: '" + path + "'");
}

// Paths inside a config file are resolved relative to that file's directory.
std::string resolve_relative(const std::string& base_file, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_file).parent_path() / p).string();
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim_copy(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError(origin + ": unterminated section header", line_no, 1);
      section = trim_copy(t.substr(1, t.size() - 2));
      if (section.empty()) throw ParseError(origin + ": empty section name", line_no, 1);
      cfg.values_[section];
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) throw ParseError(origin + ": expected key = value", line_no, 1);
    const std::string key = trim_copy(t.substr(0, eq));
    const std::string value = trim_copy(t.substr(eq + 1));
    if (key.empty()) throw ParseError(origin + ": empty key", line_no, 1);
    if (section.empty()) throw ParseError(origin + ": key outside any [section]", line_no, 1);
    if (cfg.values_[section].count(key)) {
      throw ConfigError(origin + ": duplicate key '" + key + "' in [" + section + "]");
    }
    cfg.values_[section][key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

bool KeyValueConfig::has(const std::string& section, const std::string& key) const {
  auto s = values_.find(section);
  return s != values_.end() && s->second.count(key) > 0;
}

std::string KeyValueConfig::get_string(const std::string& section, const std::string& key) const {
  auto s = values_.find(section);
  if (s == values_.end() || !s->second.count(key)) {
    throw ConfigError(origin_ + ": missing required key '" + key + "' in [" + section + "]");
  }
  return s->second.at(key);
}

std::string KeyValueConfig::get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

double KeyValueConfig::get_double(const std::string& section, const std::string& key,
                                  double fallback) const {
  if (!has(section, key)) return fallback;
  return to_double(get_string(section, key), section + "." + key);
}

long long KeyValueConfig::get_int(const std::string& section, const std::string& key,
                                  long long fallback) const {
  if (!has(section, key)) return fallback;
  return to_int(get_string(section, key), section + "." + key);
}

uint64_t KeyValueConfig::get_u64(const std::string& section, const std::string& key,
                                 uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  return to_u64(get_string(section, key), section + "." + key);
}

bool KeyValueConfig::get_bool(const std::string& section, const std::string& key,
                              bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get_string(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(origin_ + ": '" + v + "' is not a boolean for key " + section + "." + key);
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& section,
                                                    const std::string& key) const {
  std::vector<double> out;
  for (const std::string& item : split_list(get_string(section, key))) {
    out.push_back(to_double(item, section + "." + key));
  }
  return out;
}

std::vector<long long> KeyValueConfig::get_int_list(const std::string& section,
                                                    const std::string& key) const {
  std::vector<long long> out;
  for (const std::string& item : split_list(get_string(section, key))) {
    out.push_back(to_int(item, section + "." + key));
  }
  return out;
}

void KeyValueConfig::require_known(const std::map<std::string, std::set<std::string>>& schema) const {
  for (const auto& [section, kv] : values_) {
    auto s = schema.find(section);
    if (s == schema.end()) {
      throw ConfigError(origin_ + ": unknown section [" + section + "]");
    }
    for (const auto& [key, value] : kv) {
      (void)value;
      if (!s->second.count(key)) {
        throw ConfigError(origin_ + ": unknown key '" + key + "' in [" + section + "]");
      }
    }
  }
}

AttackAssetConfig AttackAssetConfig::load(const std::string& path) {
  const KeyValueConfig kv = KeyValueConfig::parse_file(path);
  kv.require_known({{"attack",
                     {"victim_weights", "weights_fnv1a", "bases_csv", "bases_fnv1a", "epsilon",
                      "balance_c"}}});
  AttackAssetConfig cfg;
  cfg.victim_weights = resolve_relative(path, kv.get_string("attack", "victim_weights"));
  cfg.weights_fnv1a = kv.get_u64("attack", "weights_fnv1a", 0);
  cfg.bases_csv = resolve_relative(path, kv.get_string("attack", "bases_csv"));
  cfg.bases_fnv1a = kv.get_u64("attack", "bases_fnv1a", 0);
  cfg.epsilon = kv.get_double("attack", "epsilon", 1.0);
  cfg.balance_c = kv.get_double("attack", "balance_c", 1.0);
  require_file(cfg.victim_weights, "attack victim weights");
  require_file(cfg.bases_csv, "attack base inputs");
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  const KeyValueConfig kv = KeyValueConfig::parse_file(path);
  kv.require_known({
      {"problem",
       {"kind", "dim", "components", "samples", "clusters", "blob_scale", "data_seed", "csv_path",
        "attack_config", "epsilon", "balance_c", "rank", "noise_sigma", "fixed_rank_gamma"}},
      {"run",
       {"rounds", "local_steps", "clients", "eta", "eta_g", "mu", "m", "rank", "variant",
        "batch_size", "metric_interval", "seed", "seeds", "threads", "record_walltime"}},
      {"partition", {"scheme", "shards_per_client", "alpha"}},
      {"probe", {"mu_list", "bias_samples", "variance_repeats", "variance_m"}},
      {"output", {"dir"}},
  });

  ExperimentConfig cfg;
  cfg.problem_kind = kv.get_string("problem", "kind");
  cfg.dim = static_cast<int>(kv.get_int("problem", "dim", cfg.dim));
  cfg.components = static_cast<int>(kv.get_int("problem", "components", cfg.components));
  cfg.samples = static_cast<int>(kv.get_int("problem", "samples", cfg.samples));
  cfg.clusters = static_cast<int>(kv.get_int("problem", "clusters", cfg.clusters));
  cfg.blob_scale = kv.get_double("problem", "blob_scale", cfg.blob_scale);
  cfg.data_seed = kv.get_u64("problem", "data_seed", cfg.data_seed);
  cfg.balance_c = kv.get_double("problem", "balance_c", cfg.balance_c);
  cfg.noise_sigma = kv.get_double("problem", "noise_sigma", cfg.noise_sigma);
  cfg.fixed_rank_gamma = kv.get_double("problem", "fixed_rank_gamma", cfg.fixed_rank_gamma);
  if (kv.has("problem", "csv_path")) {
    cfg.csv_path = resolve_relative(path, kv.get_string("problem", "csv_path"));
  }
  if (kv.has("problem", "attack_config")) {
    cfg.attack_config = resolve_relative(path, kv.get_string("problem", "attack_config"));
  }
  if (kv.has("problem", "epsilon")) {
    cfg.epsilon_override = kv.get_double("problem", "epsilon", 0.0);
  }

  if (cfg.problem_kind == "kpca") {
    // synthetic; nothing further to validate
  } else if (cfg.problem_kind == "kpca_csv") {
    if (cfg.csv_path.empty()) throw ConfigError("config: kpca_csv requires csv_path");
    require_file(cfg.csv_path, "kpca dataset");
  } else if (cfg.problem_kind == "attack") {
    if (cfg.attack_config.empty()) throw ConfigError("config: attack requires attack_config");
    require_file(cfg.attack_config, "attack asset config");
  } else if (cfg.problem_kind == "lowrank") {
    // synthetic
  } else {
    throw ConfigError("config: unknown problem kind '" + cfg.problem_kind + "'");
  }

  // Sweepable integer parameters (at most one list).
  auto read_sweep = [&](const std::string& key, int fallback) {
    SweepValues sv;
    sv.key = key;
    if (kv.has("run", key)) {
      for (long long v : kv.get_int_list("run", key)) sv.values.push_back(static_cast<int>(v));
      if (sv.values.empty()) throw ConfigError("config: empty list for run." + key);
    } else {
      sv.values = {fallback};
    }
    return sv;
  };
  cfg.clients_sweep = read_sweep("clients", 1);
  cfg.local_steps_sweep = read_sweep("local_steps", 1);
  cfg.m_sweep = read_sweep("m", 1);
  cfg.rank_sweep = read_sweep("rank", 2);
  cfg.lowrank_rank = cfg.rank_sweep.values.front();

  int sweep_count = 0;
  for (const SweepValues* sv :
       {&cfg.clients_sweep, &cfg.local_steps_sweep, &cfg.m_sweep, &cfg.rank_sweep}) {
    if (sv->is_sweep()) ++sweep_count;
  }
  if (sweep_count > 1) {
    throw ConfigError("config: at most one of clients/local_steps/m/rank may be a sweep list");
  }

  cfg.run.n_clients = cfg.clients_sweep.values.front();
  cfg.run.rounds = static_cast<int>(kv.get_int("run", "rounds", 100));
  cfg.run.local_steps = cfg.local_steps_sweep.values.front();
  cfg.run.eta = kv.get_double("run", "eta", 1e-2);
  if (kv.has("run", "eta_g")) {
    const std::string v = kv.get_string("run", "eta_g");
    if (v != "auto") cfg.run.eta_g = to_double(v, "run.eta_g");
  }
  if (kv.has("run", "mu")) {
    const std::string v = kv.get_string("run", "mu");
    cfg.run.smoothing.mu = (v == "auto") ? 0.0 : to_double(v, "run.mu");
  } else {
    cfg.run.smoothing.mu = 0.0;  // resolved default
  }
  cfg.run.smoothing.m = cfg.m_sweep.values.front();
  const std::string variant = kv.get_string("run", "variant", "projection");
  if (variant == "projection") {
    cfg.run.smoothing.variant = EstimatorVariant::Projection;
  } else if (variant == "retraction") {
    cfg.run.smoothing.variant = EstimatorVariant::RetractionPolar;
  } else {
    throw ConfigError("config: unknown estimator variant '" + variant + "'");
  }
  cfg.run.batch_size = static_cast<int>(kv.get_int("run", "batch_size", 0));
  cfg.run.metric_interval = static_cast<int>(kv.get_int("run", "metric_interval", 1));
  cfg.run.threads = static_cast<int>(kv.get_int("run", "threads", 1));
  cfg.run.record_walltime = kv.get_bool("run", "record_walltime", false);

  if (kv.has("run", "seeds")) {
    cfg.seeds.clear();
    for (long long s : kv.get_int_list("run", "seeds")) {
      cfg.seeds.push_back(static_cast<uint64_t>(s));
    }
    if (cfg.seeds.empty()) throw ConfigError("config: empty seeds list");
  } else {
    cfg.seeds = {kv.get_u64("run", "seed", 1)};
  }
  cfg.run.master_seed = cfg.seeds.front();

  const std::string scheme = kv.get_string("partition", "scheme", "iid");
  if (scheme == "iid") {
    cfg.partition.scheme = PartitionScheme::IID;
  } else if (scheme == "sorted_shards") {
    cfg.partition.scheme = PartitionScheme::SortedShards;
  } else if (scheme == "dirichlet") {
    cfg.partition.scheme = PartitionScheme::Dirichlet;
  } else {
    throw ConfigError("config: unknown partition scheme '" + scheme + "'");
  }
  cfg.partition.shards_per_client =
      static_cast<int>(kv.get_int("partition", "shards_per_client", 2));
  cfg.partition.alpha = kv.get_double("partition", "alpha", 0.5);

  if (kv.has("probe", "mu_list")) cfg.probe_mu_list = kv.get_double_list("probe", "mu_list");
  cfg.probe_bias_samples = kv.get_int("probe", "bias_samples", cfg.probe_bias_samples);
  cfg.probe_variance_repeats =
      kv.get_int("probe", "variance_repeats", cfg.probe_variance_repeats);
  if (kv.has("probe", "variance_m")) {
    cfg.probe_variance_m.clear();
    for (long long v : kv.get_int_list("probe", "variance_m")) {
      cfg.probe_variance_m.push_back(static_cast<int>(v));
    }
  }

  cfg.out_dir = kv.get_string("output", "dir", cfg.out_dir);
  return cfg;
}

const SweepValues* ExperimentConfig::active_sweep() const {
  for (const SweepValues* sv : {&clients_sweep, &local_steps_sweep, &m_sweep, &rank_sweep}) {
    if (sv->is_sweep()) return sv;
  }
  return nullptr;
}

std::unique_ptr<StochasticProblem> ExperimentConfig::make_problem() const {
  return make_problem_with(lowrank_rank);
}

std::unique_ptr<StochasticProblem> ExperimentConfig::make_problem_with(int rank_override) const {
  if (problem_kind == "kpca") {
    RngStream data(data_seed, {uint64_t{1} << 32});
    const SyntheticBlobs blobs =
        make_synthetic_blobs(samples, dim, clusters, blob_scale, data);
    return std::make_unique<KpcaProblem>(KpcaProblem::from_samples(blobs.samples, components));
  }
  if (problem_kind == "kpca_csv") {
    return std::make_unique<KpcaProblem>(
        KpcaProblem::from_samples(load_matrix_csv(csv_path), components));
  }
  if (problem_kind == "attack") {
    const AttackAssetConfig asset = AttackAssetConfig::load(attack_config);
    LinearVictim victim = LinearVictim::load(asset.victim_weights, asset.weights_fnv1a);
    const uint64_t bases_hash = fnv1a_file(asset.bases_csv);
    if (bases_hash != asset.bases_fnv1a) {
      throw ConfigError("attack bases asset hash mismatch: file was modified");
    }
    const Matrix table = load_matrix_csv(asset.bases_csv);
    Matrix bases(table.rows(), table.cols() - 1);
    std::vector<int> labels(table.rows());
    for (int i = 0; i < table.rows(); ++i) {
      labels[i] = static_cast<int>(table(i, 0));
      for (int j = 1; j < table.cols(); ++j) bases(i, j - 1) = table(i, j);
    }
    const double eps = epsilon_override.value_or(asset.epsilon);
    return std::make_unique<SphereAttackProblem>(std::move(victim), std::move(bases),
                                                 std::move(labels), eps, asset.balance_c);
  }
  if (problem_kind == "lowrank") {
    RngStream data(data_seed, {uint64_t{1} << 33});
    return std::make_unique<LowRankRegressionProblem>(LowRankRegressionProblem::synthetic(
        dim, components, rank_override, samples, noise_sigma, fixed_rank_gamma, data));
  }
  throw ConfigError("config: unknown problem kind '" + problem_kind + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::describe(
    const RunConfig& resolved, uint64_t seed) const {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("problem", problem_kind);
  kv.emplace_back("dim", std::to_string(dim));
  kv.emplace_back("components", std::to_string(components));
  kv.emplace_back("samples", std::to_string(samples));
  kv.emplace_back("data_seed", std::to_string(data_seed));
  kv.emplace_back("clients", std::to_string(resolved.n_clients));
  kv.emplace_back("rounds", std::to_string(resolved.rounds));
  kv.emplace_back("local_steps", std::to_string(resolved.local_steps));
  kv.emplace_back("eta", format_double(resolved.eta));
  kv.emplace_back("eta_g", format_double(resolved.eta_g_value()));
  kv.emplace_back("eta_tilde", format_double(resolved.eta_tilde()));
  kv.emplace_back("m", std::to_string(resolved.smoothing.m));
  kv.emplace_back("variant", resolved.smoothing.variant == EstimatorVariant::Projection
                                 ? "projection"
                                 : "retraction");
  kv.emplace_back("batch_size", std::to_string(resolved.batch_size));
  kv.emplace_back("metric_interval", std::to_string(resolved.metric_interval));
  kv.emplace_back("threads", std::to_string(resolved.threads));
  kv.emplace_back("seed", std::to_string(seed));
  switch (partition.scheme) {
    case PartitionScheme::IID:
      kv.emplace_back("partition", "iid");
      break;
    case PartitionScheme::SortedShards:
      kv.emplace_back("partition", "sorted_shards");
      kv.emplace_back("shards_per_client", std::to_string(partition.shards_per_client));
      break;
    case PartitionScheme::Dirichlet:
      kv.emplace_back("partition", "dirichlet");
      kv.emplace_back("alpha", format_double(partition.alpha));
      break;
  }
  return kv;
}

}  // namespace zofed
