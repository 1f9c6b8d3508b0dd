// Acceptance suite: one pass/fail line per criterion, exit 0 only when every
// selected criterion passes. `--only N` runs a single criterion, `--list`
// prints the set.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "zofed/attack.hpp"
#include "zofed/config.hpp"
#include "zofed/csv.hpp"
#include "zofed/estimator.hpp"
#include "zofed/fedsim.hpp"
#include "zofed/kpca.hpp"
#include "zofed/trace.hpp"

using namespace zofed;

namespace {

namespace fs = std::filesystem;

struct Criterion {
  int id;
  std::string title;
  std::function<bool(std::string&)> run;
};

// ---------------------------------------------------------------------------
// helpers

Matrix in_tube_point(const ManifoldKind& m, double max_dist, RngStream& stream) {
  const ManifoldPoint x = project(m, sample_gaussian(stream, m.rows(), m.cols()));
  const Matrix w = sample_unit_sphere(stream, m.rows(), m.cols());
  return x.value() + (max_dist * stream.next_uniform()) * w;
}

KpcaProblem kpca_instance(uint64_t data_seed, int n_samples, int dim, int r, int clusters,
                          double scale) {
  RngStream data(data_seed, {99});
  return KpcaProblem::from_samples(
      make_synthetic_blobs(n_samples, dim, clusters, scale, data).samples, r);
}

struct NoisyConstantOracle : FunctionOracle {
  double sigma = 0.5;
  double do_eval(const Matrix& x, RngStream stream) const override {
    const uint64_t key =
        stream.next_u64() ^ fnv1a_bytes(x.data(), sizeof(double) * static_cast<size_t>(x.size()));
    RngStream noise(key);
    return 1.0 + sigma * noise.next_gaussian();
  }
  bool has_exact_gradient() const override { return true; }
  Matrix exact_euclid_grad(const Matrix& x) const override { return Matrix(x.rows(), x.cols()); }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------
// criteria

bool criterion_manifold_properties(std::string& detail) {
  RngStream stream(2024, {1});
  for (const ManifoldKind& m :
       {ManifoldKind::sphere(4, 1), ManifoldKind::stiefel(5, 2), ManifoldKind::oblique(4, 3)}) {
    // Non-expansiveness factor <= 2 over 1000 in-tube pairs.
    for (int i = 0; i < 1000; ++i) {
      const Matrix a = in_tube_point(m, m.gamma(), stream);
      const Matrix b = in_tube_point(m, m.gamma(), stream);
      const double lhs = (project(m, a).value() - project(m, b).value()).norm();
      if (lhs > 2.0 * (a - b).norm() + 1e-10) {
        detail = m.name() + ": expansion factor " + format_double(lhs / (a - b).norm());
        return false;
      }
    }
    // Projection residual lies in the normal space at the projected point.
    for (int i = 0; i < 300; ++i) {
      const Matrix a = in_tube_point(m, m.gamma(), stream);
      const ManifoldPoint p = project(m, a);
      const double res = tangent_project(p, a - p.value()).norm();
      if (res > 1e-8 * (1.0 + a.norm())) {
        detail = m.name() + ": normal residual " + format_double(res);
        return false;
      }
    }
    // Projection optimality against 100 sampled manifold points.
    for (int i = 0; i < 20; ++i) {
      const Matrix a = in_tube_point(m, m.gamma(), stream);
      const double best = (a - project(m, a).value()).norm();
      for (int j = 0; j < 100; ++j) {
        const ManifoldPoint y = project(m, sample_gaussian(stream, m.rows(), m.cols()));
        if (best > (a - y.value()).norm() + 1e-12) {
          detail = m.name() + ": sampled point beats the projection";
          return false;
        }
      }
    }
  }
  return true;
}

bool criterion_bias_law(std::string& detail) {
  const KpcaProblem problem = kpca_instance(41, 14, 6, 2, 2, 2.0);
  const ManifoldKind& m = problem.manifold();
  const ShardOracle oracle(problem, problem.all_indices(), 0);
  RngStream ps(41, {1});
  const ManifoldPoint x = project(m, sample_gaussian(ps, 6, 2));

  // The 0.03 point sits at the Monte-Carlo floor of this sampling budget;
  // the budget is part of the pinned procedure.
  const auto bias = probe_bias(m, x, oracle, {0.3, 0.1, 0.03}, 400000, RngStream(41, {2}));
  const double slope = log_log_slope(bias);
  std::ostringstream msg;
  msg << "slope " << format_double(slope);
  for (const auto& [mu, b] : bias) msg << ", bias(" << mu << ")=" << format_double(b);
  detail = msg.str();
  return slope >= 0.7 && slope <= 1.3;
}

bool criterion_variance_law(std::string& detail) {
  const ManifoldKind m = ManifoldKind::sphere(4, 1);
  RngStream ps(43, {1});
  const ManifoldPoint x = project(m, sample_gaussian(ps, 4, 1));
  const NoisyConstantOracle oracle;

  auto mse_at = [&](int m_samples, long repeats) {
    const SmoothingConfig cfg{1e-3, m_samples, EstimatorVariant::Projection};
    return probe_variance(m, x, oracle, cfg, repeats,
                          RngStream(43, {static_cast<uint64_t>(m_samples)}));
  };
  const double mse1 = mse_at(1, 3000);
  const double mse10 = mse_at(10, 600);
  const double mse100 = mse_at(100, 200);
  const double ratio = mse1 / mse100;
  detail = "mse(1)/mse(100) = " + format_double(ratio);
  return ratio >= 5.0 && ratio <= 200.0 && mse1 > mse10 && mse10 > mse100;
}

bool criterion_smoothing_identity(std::string& detail) {
  RngStream stream(47, {1});
  for (auto [rows, cols] : {std::pair{3, 2}, {4, 3}}) {  // d = 6 and d = 12
    const ManifoldKind m = ManifoldKind::stiefel(rows, cols);
    const ManifoldPoint x = project(m, sample_gaussian(stream, rows, cols));
    const Matrix g = tangent_project(x, sample_gaussian(stream, rows, cols));
    const int d = rows * cols;
    Matrix acc(rows, cols);
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
      const Matrix u = sample_unit_sphere(stream, rows, cols);
      const double c = dot(g, u);
      for (int k = 0; k < acc.size(); ++k) acc[k] += c * u[k];
    }
    acc *= static_cast<double>(d) / static_cast<double>(n);
    const double rel = (acc - g).norm() / g.norm();
    detail += "d=" + std::to_string(d) + " rel " + format_double(rel) + "  ";
    if (rel > 0.02) return false;
  }
  return true;
}

bool criterion_kpca_convergence(std::string& detail) {
  const KpcaProblem problem = kpca_instance(53, 20, 10, 2, 1, 2.5);
  const auto [f_star, x_star] = problem.reference_optimum();
  (void)x_star;
  const double target = 1e-2 * std::fabs(f_star);

  RunConfig cfg;
  cfg.rounds = 10000;
  cfg.eta = 3e-3;
  cfg.smoothing = {1e-4, 100, EstimatorVariant::Projection};
  cfg.master_seed = 53;
  cfg.metric_interval = 200;
  const FedResult proj = run_centralized_zo(cfg, problem);

  double best_gap = 1e300;
  for (const TraceRecord& r : proj.trace) best_gap = std::min(best_gap, r.f_gap);
  if (best_gap > target) {
    detail = "projection variant best f_gap " + format_double(best_gap) + " > target " +
             format_double(target);
    return false;
  }

  RunConfig rcfg = cfg;
  rcfg.smoothing.variant = EstimatorVariant::RetractionPolar;
  const FedResult retr = run_centralized_zo(rcfg, problem);

  detail = "best f_gap " + format_double(best_gap) + " (target " + format_double(target) +
           "); estimator ms/iter projection " + format_double(proj.estimator_ms_per_iter) +
           " vs retraction " + format_double(retr.estimator_ms_per_iter);
  return proj.estimator_ms_per_iter <= retr.estimator_ms_per_iter;
}

bool criterion_algorithm_identities(std::string& detail) {
  const KpcaProblem problem = kpca_instance(59, 16, 5, 2, 2, 2.0);

  // Conservation and closed form over a heterogeneous run.
  {
    RunConfig cfg;
    cfg.n_clients = 4;
    cfg.rounds = 5;
    cfg.local_steps = 3;
    cfg.eta = 5e-4;
    cfg.eta_g = 1.0;
    cfg.smoothing = {1e-3, 2, EstimatorVariant::Projection};
    cfg.master_seed = 59;
    cfg.batch_size = 2;
    RngStream pstream(59, {(uint64_t{1} << 31) + 1});
    const Partition part = partition_dataset(problem.num_samples(), 4, PartitionConfig{}, pstream);
    bool ok = true;
    run_federated(cfg, problem, part, [&](const RoundInfo& info) {
      Matrix sum(5, 2);
      double scale = 1.0;
      for (const ClientState& c : info.clients) {
        sum += c.correction;
        scale = std::max(scale, c.correction.norm());
      }
      if (sum.norm() > 1e-12 * 4 * scale) ok = false;

      Matrix mean_all(5, 2);
      for (const ClientState& c : info.clients)
        for (const Matrix& g : c.round_history) mean_all += g;
      mean_all *= 1.0 / (4.0 * cfg.local_steps);
      for (const ClientState& c : info.clients) {
        Matrix own(5, 2);
        for (const Matrix& g : c.round_history) own += g;
        own *= 1.0 / static_cast<double>(cfg.local_steps);
        if (((mean_all - own) - c.correction).norm() > 1e-12 * std::max(1.0, scale)) ok = false;
      }
    });
    if (!ok) {
      detail = "correction conservation or closed form failed";
      return false;
    }
  }

  // n = 1 degeneration.
  {
    RunConfig cfg;
    cfg.n_clients = 1;
    cfg.rounds = 8;
    cfg.local_steps = 1;
    cfg.eta = 1e-3;
    cfg.eta_g = 1.0;
    cfg.smoothing = {1e-3, 2, EstimatorVariant::Projection};
    cfg.master_seed = 61;
    cfg.batch_size = 2;
    RngStream pstream(61, {(uint64_t{1} << 31) + 1});
    const Partition part = partition_dataset(problem.num_samples(), 1, PartitionConfig{}, pstream);
    const FedResult fed = run_federated(cfg, problem, part);
    const FedResult central = run_centralized_zo(cfg, problem);
    const double gap = (fed.final_point.value() - central.final_point.value()).norm();
    if (gap > 1e-12) {
      detail = "n=1 degeneration gap " + format_double(gap);
      return false;
    }
  }

  // Homogeneous collapse.
  {
    RunConfig cfg;
    cfg.n_clients = 4;
    cfg.rounds = 6;
    cfg.local_steps = 1;
    cfg.eta = 1e-3;
    cfg.eta_g = 1.0;
    cfg.smoothing = {1e-3, 2, EstimatorVariant::Projection};
    cfg.master_seed = 67;
    cfg.batch_size = 2;
    cfg.share_client_streams = true;
    Partition part;
    part.assignment.assign(4, problem.all_indices());
    const FedResult fed = run_federated(cfg, problem, part);
    RunConfig central_cfg = cfg;
    central_cfg.n_clients = 1;
    const FedResult central = run_centralized_zo(central_cfg, problem);
    const double gap = (fed.final_point.value() - central.final_point.value()).norm();
    if (gap > 1e-12) {
      detail = "homogeneous collapse gap " + format_double(gap);
      return false;
    }
  }
  return true;
}

bool criterion_theorem_trends(std::string& detail) {
  // Heterogeneous kPCA, sorted shards, 5 seeds, fixed eta_tilde.
  const KpcaProblem problem = kpca_instance(71, 48, 6, 2, 3, 2.0);
  const std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
  const double eta_tilde = 0.05;
  const int rounds = 200;

  PartitionConfig pc;
  pc.scheme = PartitionScheme::SortedShards;
  pc.shards_per_client = 2;

  auto run_point = [&](int n, int tau, int m_samples, uint64_t seed) {
    RunConfig cfg;
    cfg.n_clients = n;
    cfg.rounds = rounds;
    cfg.local_steps = tau;
    cfg.eta_g = std::sqrt(static_cast<double>(n));
    cfg.eta = eta_tilde / (cfg.eta_g_value() * tau);
    cfg.smoothing = {1e-3, m_samples, EstimatorVariant::Projection};
    cfg.master_seed = seed;
    cfg.batch_size = 2;
    const std::vector<double> keys = problem.partition_keys();
    RngStream pstream(seed, {(uint64_t{1} << 31) + 1});
    const Partition part = partition_dataset(problem.num_samples(), n, pc, pstream, &keys);
    return run_federated(cfg, problem, part);
  };

  auto mean_map = [&](const FedResult& r) {
    double acc = 0.0;
    int count = 0;
    for (const TraceRecord& rec : r.trace) {
      if (rec.round <= rounds) {
        acc += rec.grad_map_sq;
        ++count;
      }
    }
    return acc / count;
  };

  const auto [f_star, x_star] = problem.reference_optimum();
  (void)x_star;

  // (a) round-averaged squared gradient mapping: n = 8 <= n = 2.
  double avg_n2 = 0.0, avg_n8 = 0.0;
  for (uint64_t s : seeds) {
    avg_n2 += mean_map(run_point(2, 2, 10, s));
    avg_n8 += mean_map(run_point(8, 2, 10, s));
  }
  avg_n2 /= seeds.size();
  avg_n8 /= seeds.size();

  // (b) rounds to reach the target gap: tau = 5 <= tau = 1.
  const double target_gap = 0.1 * std::fabs(f_star);
  auto rounds_to_target = [&](const FedResult& r) {
    for (const TraceRecord& rec : r.trace) {
      if (rec.f_gap <= target_gap) return static_cast<double>(rec.round);
    }
    return static_cast<double>(rounds + 1);
  };
  double rounds_tau1 = 0.0, rounds_tau5 = 0.0;
  for (uint64_t s : seeds) {
    rounds_tau1 += rounds_to_target(run_point(4, 1, 10, s));
    rounds_tau5 += rounds_to_target(run_point(4, 5, 10, s));
  }
  rounds_tau1 /= seeds.size();
  rounds_tau5 /= seeds.size();

  // (c) final metric: m = 50 <= m = 5.
  double final_m5 = 0.0, final_m50 = 0.0;
  for (uint64_t s : seeds) {
    final_m5 += run_point(4, 2, 5, s).trace.back().grad_map_sq;
    final_m50 += run_point(4, 2, 50, s).trace.back().grad_map_sq;
  }
  final_m5 /= seeds.size();
  final_m50 /= seeds.size();

  detail = "avg |G|^2 n2 " + format_double(avg_n2) + " vs n8 " + format_double(avg_n8) +
           "; rounds-to-gap tau1 " + format_double(rounds_tau1) + " vs tau5 " +
           format_double(rounds_tau5) + "; final m5 " + format_double(final_m5) + " vs m50 " +
           format_double(final_m50);
  return avg_n8 <= avg_n2 && rounds_tau5 <= rounds_tau1 && final_m50 <= final_m5;
}

bool criterion_cli_determinism(std::string& detail) {
  const fs::path tmp = fs::temp_directory_path() / "zofed_acceptance_determinism";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  const std::string cfg_path = (tmp / "det.cfg").string();
  {
    std::ofstream cfg(cfg_path, std::ios::binary);
    cfg << "[problem]\nkind = kpca\ndim = 5\ncomponents = 2\nsamples = 24\nclusters = 2\n"
        << "[run]\nrounds = 12\nclients = 8\nlocal_steps = 2\neta = 0.0005\nm = 2\n"
        << "batch_size = 2\nmetric_interval = 1\nseed = 9\n"
        << "[output]\ndir = PLACEHOLDER\n";
  }
  const std::string cli = ZOFED_CLI_PATH;
  const std::string out1 = (tmp / "a").string();
  const std::string out2 = (tmp / "b").string();
  const std::string out3 = (tmp / "c").string();
  if (run_command(cli + " federated --config " + cfg_path + " --out " + out1 +
                  " --threads 1 >/dev/null 2>&1") != 0 ||
      run_command(cli + " federated --config " + cfg_path + " --out " + out2 +
                  " --threads 1 >/dev/null 2>&1") != 0 ||
      run_command(cli + " federated --config " + cfg_path + " --out " + out3 +
                  " --threads 8 >/dev/null 2>&1") != 0) {
    detail = "cli run failed";
    return false;
  }
  const std::string t1 = read_file(out1 + "/fed_seed9.csv");
  const std::string t2 = read_file(out2 + "/fed_seed9.csv");
  const std::string t3 = read_file(out3 + "/fed_seed9.csv");
  if (t1.empty() || t1 != t2 || t1 != t3) {
    detail = "trace files differ across reruns or thread counts";
    return false;
  }
  detail = "traces byte-identical across reruns and threads 1 vs 8";
  return true;
}

bool criterion_attack_surrogate(std::string& detail) {
  const std::string cfg_path = std::string(ZOFED_SOURCE_DIR) + "/configs/federated_attack.cfg";
  const ExperimentConfig cfg = ExperimentConfig::load(cfg_path);
  const auto problem_base = cfg.make_problem();
  const auto* problem = dynamic_cast<const SphereAttackProblem*>(problem_base.get());
  if (problem == nullptr) {
    detail = "attack config did not produce a sphere-attack problem";
    return false;
  }
  if (problem->num_samples() != 25) {
    detail = "expected 25 base inputs";
    return false;
  }

  RunConfig rc = cfg.run;
  rc.master_seed = cfg.seeds.front();
  const std::vector<double> keys = problem->partition_keys();
  RngStream pstream(rc.master_seed, {(uint64_t{1} << 31) + 1});
  const Partition part =
      partition_dataset(problem->num_samples(), rc.n_clients, cfg.partition, pstream, &keys);
  const FedResult result = run_federated(rc, *problem, part);
  const double rate = problem->flip_rate(result.final_point.value());
  detail = "flip rate " + format_double(rate) + " after " + std::to_string(rc.rounds) +
           " rounds at epsilon " + format_double(problem->epsilon());
  return rate >= 0.8;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  bool list = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    if (std::strcmp(argv[i], "--list") == 0) list = true;
  }

  const std::vector<Criterion> criteria{
      {1, "manifold property suite (non-expansiveness, normal residual, optimality)",
       criterion_manifold_properties},
      {2, "estimator bias law: log-log slope in [0.7, 1.3] on kPCA St(6,2)", criterion_bias_law},
      {3, "estimator variance law: mse(m=1)/mse(m=100) in [5, 200], monotone",
       criterion_variance_law},
      {4, "sphere-smoothing identity within 2% at 1e6 draws", criterion_smoothing_identity},
      {5, "centralized kPCA convergence and estimator timing", criterion_kpca_convergence},
      {6, "federated algebraic identities (corrections, degenerations)",
       criterion_algorithm_identities},
      {7, "convergence trends: clients, local steps, batch size", criterion_theorem_trends},
      {8, "byte-identical traces across reruns and thread counts", criterion_cli_determinism},
      {9, "sphere-attack surrogate flips >= 80% of base inputs", criterion_attack_surrogate},
  };

  if (list) {
    for (const Criterion& c : criteria) std::printf("%d: %s\n", c.id, c.title.c_str());
    return 0;
  }

  int failures = 0;
  int ran = 0;
  for (const Criterion& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ++ran;
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    if (!ok) ++failures;
    std::printf("[%s] criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", c.id, c.title.c_str(),
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no criterion selected\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
