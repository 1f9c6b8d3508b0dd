// Batch experiment front-end: parse a config, dispatch runs, write traces
// and summaries. Subcommands: centralized, federated, probe, selftest.
// Exit codes: 0 success, 1 test/assert failure, 2 usage/config error,
// 3 numerical abort.

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zofed/attack.hpp"
#include "zofed/config.hpp"
#include "zofed/csv.hpp"
#include "zofed/estimator.hpp"
#include "zofed/fedsim.hpp"
#include "zofed/selftest.hpp"

#ifndef ZOFED_VERSION_HASH
#define ZOFED_VERSION_HASH "unknown"
#endif

namespace {

namespace fs = std::filesystem;
using namespace zofed;

struct CliOptions {
  std::string config_path;
  std::string out_dir;        // overrides [output] dir when set
  std::string seeds_csv;      // overrides [run] seeds when set
  int threads = 0;            // overrides [run] threads when > 0
};

void apply_overrides(ExperimentConfig& cfg, const CliOptions& opt) {
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  if (opt.threads > 0) cfg.run.threads = opt.threads;
  if (!opt.seeds_csv.empty()) {
    cfg.seeds.clear();
    std::stringstream ss(opt.seeds_csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        cfg.seeds.push_back(std::stoull(item));
      } catch (const std::exception&) {
        throw ConfigError("--seeds: '" + item + "' is not an integer");
      }
    }
    if (cfg.seeds.empty()) throw ConfigError("--seeds: empty list");
  }
}

std::string variant_name(EstimatorVariant v) {
  return v == EstimatorVariant::Projection ? "projection" : "retraction";
}

void write_run_outputs(const ExperimentConfig& cfg, const RunConfig& rc, uint64_t seed,
                       const std::string& stem, const FedResult& result) {
  const fs::path base = fs::path(cfg.out_dir) / stem;
  write_trace_csv(base.string() + ".csv", result.trace);
  auto meta = cfg.describe(rc, seed);
  meta.emplace_back("mu", format_double(result.mu_used));
  meta.emplace_back("oracle_calls", std::to_string(result.oracle_calls));
  meta.emplace_back("code_version", ZOFED_VERSION_HASH);
  write_meta_file(base.string() + ".meta", meta);
}

double mean_grad_map(const std::vector<TraceRecord>& trace, int rounds) {
  // Theorem-style average over recorded rounds 1..K.
  double acc = 0.0;
  int count = 0;
  for (const TraceRecord& r : trace) {
    if (r.round <= rounds) {
      acc += r.grad_map_sq;
      ++count;
    }
  }
  return count ? acc / count : 0.0;
}

int cmd_centralized(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const auto problem = cfg.make_problem();
  std::ostringstream summary;

  for (uint64_t seed : cfg.seeds) {
    for (EstimatorVariant variant :
         {EstimatorVariant::Projection, EstimatorVariant::RetractionPolar}) {
      RunConfig rc = cfg.run;
      rc.n_clients = 1;
      rc.local_steps = 1;
      rc.master_seed = seed;
      rc.smoothing.variant = variant;
      const FedResult result = run_centralized_zo(rc, *problem);
      const std::string stem =
          "centralized_" + variant_name(variant) + "_seed" + std::to_string(seed);
      write_run_outputs(cfg, rc, seed, stem, result);

      const double final_gap = result.trace.empty() ? 0.0 : result.trace.back().f_gap;
      const std::string line =
          "variant=" + variant_name(variant) + " seed=" + std::to_string(seed) +
          " estimator_ms_per_iter=" + format_double(result.estimator_ms_per_iter) +
          " projection_ms_per_iter=" + format_double(result.projection_ms_per_iter) +
          " final_f_gap=" + format_double(final_gap) + "\n";
      summary << line;
      std::printf("%s", line.c_str());
    }
  }
  write_file_atomic((fs::path(cfg.out_dir) / "centralized_summary.txt").string(), summary.str());
  return 0;
}

int cmd_federated(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const SweepValues* sweep = cfg.active_sweep();
  const std::vector<int> values = sweep ? sweep->values : std::vector<int>{0};

  std::ostringstream summary;
  summary << "param,value,seed,final_f_gap,final_grad_map_sq,mean_grad_map_sq,oracle_calls\n";

  for (int value : values) {
    RunConfig rc = cfg.run;
    std::unique_ptr<StochasticProblem> problem;
    std::string param = "none";
    if (sweep) {
      param = sweep->key;
      if (sweep->key == "clients") rc.n_clients = value;
      if (sweep->key == "local_steps") rc.local_steps = value;
      if (sweep->key == "m") rc.smoothing.m = value;
      problem = sweep->key == "rank" ? cfg.make_problem_with(value) : cfg.make_problem();
    } else {
      problem = cfg.make_problem();
    }

    std::vector<double> final_gap_acc, final_map_acc, mean_map_acc;
    for (uint64_t seed : cfg.seeds) {
      rc.master_seed = seed;
      const std::vector<double> keys = problem->partition_keys();
      RngStream pstream(seed, {(uint64_t{1} << 31) + 1});
      const Partition part =
          partition_dataset(problem->num_samples(), rc.n_clients, cfg.partition, pstream, &keys);
      const FedResult result = run_federated(rc, *problem, part);

      std::string stem = "fed";
      if (sweep) stem += "_" + sweep->key + std::to_string(value);
      stem += "_seed" + std::to_string(seed);
      write_run_outputs(cfg, rc, seed, stem, result);

      const double final_gap = result.trace.empty() ? 0.0 : result.trace.back().f_gap;
      const double final_map = result.trace.empty() ? 0.0 : result.trace.back().grad_map_sq;
      const double mean_map = mean_grad_map(result.trace, rc.rounds);
      final_gap_acc.push_back(final_gap);
      final_map_acc.push_back(final_map);
      mean_map_acc.push_back(mean_map);
      summary << param << ',' << value << ',' << seed << ',' << format_double(final_gap) << ','
              << format_double(final_map) << ',' << format_double(mean_map) << ','
              << result.oracle_calls << '\n';
    }

    auto mean_of = [](const std::vector<double>& v) {
      double acc = 0.0;
      for (double x : v) acc += x;
      return acc / static_cast<double>(v.size());
    };
    summary << param << ',' << value << ",mean," << format_double(mean_of(final_gap_acc)) << ','
            << format_double(mean_of(final_map_acc)) << ',' << format_double(mean_of(mean_map_acc))
            << ",\n";
  }

  write_file_atomic((fs::path(cfg.out_dir) / "federated_summary.csv").string(), summary.str());
  std::printf("federated sweep complete; summary at %s\n",
              (fs::path(cfg.out_dir) / "federated_summary.csv").string().c_str());
  return 0;
}

int cmd_probe(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const auto problem = cfg.make_problem();
  const ManifoldKind& m = problem->manifold();
  const ShardOracle oracle(*problem, problem->all_indices(), cfg.run.batch_size);

  const uint64_t seed = cfg.seeds.front();
  RngStream point_stream(seed, {(uint64_t{1} << 31) + 3});
  const ManifoldPoint x = project(m, sample_gaussian(point_stream, m.rows(), m.cols()));

  // Bias against mu (projection estimator, Monte-Carlo mean of single draws).
  const auto bias = probe_bias(m, x, oracle, cfg.probe_mu_list, cfg.probe_bias_samples,
                               RngStream(seed, {(uint64_t{1} << 31) + 4}));
  {
    std::ostringstream out;
    out << "mu,bias\n";
    for (const auto& [mu, b] : bias) out << format_double(mu) << ',' << format_double(b) << '\n';
    write_file_atomic((fs::path(cfg.out_dir) / "probe_bias.csv").string(), out.str());
  }
  const double bias_slope = log_log_slope(bias);
  std::printf("bias log-log slope over mu: %s\n", format_double(bias_slope).c_str());

  // Mean squared deviation against batch size, both estimator variants.
  for (EstimatorVariant variant :
       {EstimatorVariant::Projection, EstimatorVariant::RetractionPolar}) {
    std::vector<std::pair<double, double>> rows;
    std::ostringstream out;
    out << "m,mse\n";
    for (int mm : cfg.probe_variance_m) {
      SmoothingConfig sc = cfg.run.smoothing;
      sc.variant = variant;
      sc.m = mm;
      if (sc.mu <= 0.0) sc.mu = 1e-3;
      const double mse =
          probe_variance(m, x, oracle, sc, cfg.probe_variance_repeats,
                         RngStream(seed, {(uint64_t{1} << 31) + 5, static_cast<uint64_t>(variant),
                                          static_cast<uint64_t>(mm)}));
      rows.emplace_back(static_cast<double>(mm), mse);
      out << mm << ',' << format_double(mse) << '\n';
    }
    const std::string name = variant == EstimatorVariant::Projection
                                 ? "probe_variance.csv"
                                 : "probe_variance_retraction.csv";
    write_file_atomic((fs::path(cfg.out_dir) / name).string(), out.str());
    std::printf("%s variance log-log slope over m: %s\n", variant_name(variant).c_str(),
                format_double(log_log_slope(rows)).c_str());
  }

  // Isotropy of the unit-sphere sampler: vec(u) covariance ~ I/d.
  {
    const int d = m.ambient_dim();
    RngStream s(seed, {(uint64_t{1} << 31) + 6});
    const long n = 200000;
    std::vector<double> mean(d, 0.0), cov(static_cast<size_t>(d) * d, 0.0);
    for (long i = 0; i < n; ++i) {
      const Matrix u = sample_unit_sphere(s, m.rows(), m.cols());
      for (int a = 0; a < d; ++a) {
        mean[a] += u[a];
        for (int b = 0; b < d; ++b) cov[static_cast<size_t>(a) * d + b] += u[a] * u[b];
      }
    }
    double max_mean = 0.0, max_diag_dev = 0.0, max_offdiag = 0.0;
    for (int a = 0; a < d; ++a) {
      max_mean = std::max(max_mean, std::fabs(mean[a] / n));
      for (int b = 0; b < d; ++b) {
        const double c = cov[static_cast<size_t>(a) * d + b] / n;
        if (a == b) {
          max_diag_dev = std::max(max_diag_dev, std::fabs(c - 1.0 / d) * d);
        } else {
          max_offdiag = std::max(max_offdiag, std::fabs(c));
        }
      }
    }
    std::printf("isotropy: max |mean| %s, max diag deviation (relative) %s, max |offdiag| %s\n",
                format_double(max_mean).c_str(), format_double(max_diag_dev).c_str(),
                format_double(max_offdiag).c_str());
  }
  return 0;
}

int cmd_selftest(uint64_t seed, bool inject_failure) {
  const std::vector<SelftestResult> results = run_selftest(seed, inject_failure);
  int failed = 0;
  for (const SelftestResult& r : results) {
    if (r.pass) {
      std::printf("PASS  %s\n", r.name.c_str());
    } else {
      ++failed;
      std::printf("FAIL  %s: %s\n", r.name.c_str(), r.detail.c_str());
    }
  }
  std::printf("selftest: %zu checks, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zofed: zeroth-order Riemannian federated optimization experiments"};
  app.require_subcommand(1);

  CliOptions opt;
  uint64_t selftest_seed = 1;
  bool inject_failure = false;

  CLI::App* centralized = app.add_subcommand(
      "centralized", "run both estimator variants on the configured problem");
  CLI::App* federated = app.add_subcommand("federated", "federated runs with an optional sweep");
  CLI::App* probe = app.add_subcommand("probe", "estimator bias/variance/isotropy probes");
  CLI::App* selftest = app.add_subcommand("selftest", "run the property-test suite");

  for (CLI::App* sub : {centralized, federated, probe}) {
    sub->add_option("--config", opt.config_path, "experiment config file")->required();
    sub->add_option("--out", opt.out_dir, "output directory override");
    sub->add_option("--seeds", opt.seeds_csv, "comma-separated seed list override");
    sub->add_option("--threads", opt.threads, "worker thread override");
  }
  selftest->add_option("--seed", selftest_seed, "selftest master seed");
  selftest->add_flag("--inject-failure", inject_failure,
                     "append a deliberately failing fixture (exercises failure reporting)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (selftest->parsed()) return cmd_selftest(selftest_seed, inject_failure);

    ExperimentConfig cfg = ExperimentConfig::load(opt.config_path);
    apply_overrides(cfg, opt);
    if (centralized->parsed()) return cmd_centralized(cfg);
    if (federated->parsed()) return cmd_federated(cfg);
    if (probe->parsed()) return cmd_probe(cfg);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const RaggedRows& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const TubeEscape& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const DegenerateProjection& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const SmoothingOutOfTube& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
