#include "zofed/selftest.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <set>

#include "zofed/estimator.hpp"
#include "zofed/fedsim.hpp"
#include "zofed/kpca.hpp"
#include "zofed/partition.hpp"
#include "zofed/trace.hpp"

namespace zofed {
namespace {

using Check = std::function<std::optional<std::string>()>;

std::optional<std::string> fail(const std::string& detail) { return detail; }
std::optional<std::string> pass() { return std::nullopt; }

std::vector<ManifoldKind> compact_manifolds() {
  return {ManifoldKind::sphere(4, 1), ManifoldKind::stiefel(5, 2), ManifoldKind::oblique(4, 3)};
}

// Random ambient point at distance <= max_dist from the manifold.
Matrix in_tube_point(const ManifoldKind& m, double max_dist, RngStream& stream) {
  const ManifoldPoint x = project(m, sample_gaussian(stream, m.rows(), m.cols()));
  const Matrix w = sample_unit_sphere(stream, m.rows(), m.cols());
  const double d = max_dist * stream.next_uniform();
  return x.value() + d * w;
}

KpcaProblem small_kpca(uint64_t seed, int n_samples = 16, int dim = 5, int r = 2) {
  RngStream data(seed, {99});
  const SyntheticBlobs blobs = make_synthetic_blobs(n_samples, dim, 2, 2.0, data);
  return KpcaProblem::from_samples(blobs.samples, r);
}

struct NamedCheck {
  std::string name;
  Check run;
};

std::vector<NamedCheck> build_checks(uint64_t seed) {
  std::vector<NamedCheck> checks;

  checks.push_back({"svd-reconstruction", [seed] {
    RngStream s(seed, {1});
    for (auto [rows, cols] : {std::pair{10, 3}, {50, 20}, {7, 7}}) {
      const Matrix a = sample_gaussian(s, rows, cols);
      const ThinSvd svd = thin_svd(a);
      Matrix us = svd.u;
      for (int j = 0; j < static_cast<int>(svd.s.size()); ++j)
        for (int i = 0; i < rows; ++i) us(i, j) *= svd.s[j];
      const double rec = (matmul_nt(us, svd.v) - a).norm();
      if (rec > 1e-10 * a.norm()) return fail("reconstruction error " + std::to_string(rec));
      Matrix g = matmul_tn(svd.u, svd.u);
      for (int i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
      if (g.norm() > tol::kSvdReconstruction) return fail("U columns not orthonormal");
      for (size_t k = 1; k < svd.s.size(); ++k) {
        if (svd.s[k] > svd.s[k - 1]) return fail("singular values not sorted");
      }
    }
    return pass();
  }});

  checks.push_back({"rng-determinism", [seed] {
    RngStream a(seed, {4, 2});
    RngStream b(seed, {4, 2});
    for (int i = 0; i < 1000; ++i) {
      if (a.next_u64() != b.next_u64()) return fail("same (seed, path) diverged");
    }
    return pass();
  }});

  checks.push_back({"rng-spawn-independence", [seed] {
    const RngStream root(seed, {7});
    std::set<uint64_t> first;
    for (int i = 0; i < 10000; ++i) {
      RngStream child = root.spawn(static_cast<uint64_t>(i));
      first.insert(child.next_u64());
    }
    if (first.size() != 10000) return fail("first outputs of sibling streams collide");
    // Spawn order must not matter.
    RngStream c3 = root.spawn(3);
    RngStream c1 = root.spawn(1);
    RngStream c3_again = root.spawn(3);
    if (c3.next_u64() != c3_again.next_u64()) return fail("spawn is order dependent");
    (void)c1;
    return pass();
  }});

  checks.push_back({"unit-sphere-normalization", [seed] {
    RngStream s(seed, {2});
    for (int i = 0; i < 200; ++i) {
      const Matrix u = sample_unit_sphere(s, 1 + i % 7, 1 + i % 3);
      if (std::fabs(u.norm() - 1.0) > 1e-14) return fail("norm deviates by more than 1e-14");
    }
    return pass();
  }});

  checks.push_back({"projection-nonexpansive-in-tube", [seed] {
    RngStream s(seed, {3});
    for (const ManifoldKind& m : compact_manifolds()) {
      for (int i = 0; i < 1000; ++i) {
        const Matrix a = in_tube_point(m, m.gamma(), s);
        const Matrix b = in_tube_point(m, m.gamma(), s);
        const double lhs = (project(m, a).value() - project(m, b).value()).norm();
        if (lhs > 2.0 * (a - b).norm() + 1e-10) {
          return fail(m.name() + ": factor " + std::to_string(lhs / (a - b).norm()));
        }
      }
    }
    return pass();
  }});

  checks.push_back({"projection-normal-residual", [seed] {
    RngStream s(seed, {5});
    for (const ManifoldKind& m : compact_manifolds()) {
      for (int i = 0; i < 300; ++i) {
        const Matrix a = in_tube_point(m, m.gamma(), s);
        const ManifoldPoint p = project(m, a);
        const double res = tangent_project(p, a - p.value()).norm();
        if (res > 1e-8 * (1.0 + a.norm())) {
          return fail(m.name() + ": residual " + std::to_string(res));
        }
      }
    }
    return pass();
  }});

  checks.push_back({"projection-optimality-vs-sampling", [seed] {
    RngStream s(seed, {6});
    for (const ManifoldKind& m : compact_manifolds()) {
      for (int i = 0; i < 20; ++i) {
        const Matrix a = in_tube_point(m, m.gamma(), s);
        const double best = (a - project(m, a).value()).norm();
        for (int j = 0; j < 100; ++j) {
          const ManifoldPoint y = project(m, sample_gaussian(s, m.rows(), m.cols()));
          if (best > (a - y.value()).norm() + 1e-12) {
            return fail(m.name() + ": sampled point beats the projection");
          }
        }
      }
    }
    return pass();
  }});

  checks.push_back({"projection-idempotent", [seed] {
    RngStream s(seed, {8});
    for (const ManifoldKind& m : compact_manifolds()) {
      for (int i = 0; i < 100; ++i) {
        const Matrix p1 = project(m, in_tube_point(m, m.gamma(), s)).value();
        if ((project(m, p1).value() - p1).norm() > 1e-12) return fail(m.name());
      }
    }
    return pass();
  }});

  checks.push_back({"tangent-projector-linear-idempotent-selfadjoint", [seed] {
    RngStream s(seed, {9});
    const ManifoldKind m = ManifoldKind::stiefel(5, 2);
    const ManifoldPoint x = project(m, sample_gaussian(s, 5, 2));
    for (int i = 0; i < 50; ++i) {
      const Matrix v = sample_gaussian(s, 5, 2);
      const Matrix w = sample_gaussian(s, 5, 2);
      const double a = s.next_gaussian();
      const double b = s.next_gaussian();
      const Matrix lin =
          tangent_project(x, a * v + b * w) - (a * tangent_project(x, v) + b * tangent_project(x, w));
      if (lin.norm() > 1e-12 * (1.0 + v.norm() + w.norm())) return fail("not linear");
      const Matrix pv = tangent_project(x, v);
      if ((tangent_project(x, pv) - pv).norm() > 1e-12 * (1.0 + pv.norm())) {
        return fail("not idempotent");
      }
      if (std::fabs(dot(pv, w) - dot(v, tangent_project(x, w))) >
          1e-12 * (1.0 + v.norm() * w.norm())) {
        return fail("not self-adjoint");
      }
    }
    return pass();
  }});

  checks.push_back({"sphere-smoothing-identity", [seed] {
    // pr * E[<g,u> u] = g for a fixed tangent vector g, u uniform on the
    // unit sphere of the ambient space.
    RngStream s(seed, {10});
    const ManifoldKind m = ManifoldKind::stiefel(3, 2);
    const ManifoldPoint x = project(m, sample_gaussian(s, 3, 2));
    const Matrix g = tangent_project(x, sample_gaussian(s, 3, 2));
    const int d = m.ambient_dim();
    Matrix acc(3, 2);
    const long n = 1000000;
    for (long i = 0; i < n; ++i) {
      const Matrix u = sample_unit_sphere(s, 3, 2);
      const double c = dot(g, u);
      for (int k = 0; k < acc.size(); ++k) acc[k] += c * u[k];
    }
    acc *= static_cast<double>(d) / static_cast<double>(n);
    const double rel = (acc - g).norm() / g.norm();
    if (rel > 0.02) return fail("relative error " + std::to_string(rel));
    return pass();
  }});

  checks.push_back({"estimator-purity", [seed] {
    const KpcaProblem problem = small_kpca(seed);
    const ShardOracle oracle(problem, problem.all_indices(), 3);
    RngStream s(seed, {11});
    const ManifoldPoint x = project(problem.manifold(), sample_gaussian(s, problem.dim(), 2));
    const SmoothingConfig cfg{1e-3, 1, EstimatorVariant::Projection};
    const Matrix g1 = estimate_gradient(problem.manifold(), x, oracle, cfg, RngStream(seed, {12}));
    const Matrix g2 = estimate_gradient(problem.manifold(), x, oracle, cfg, RngStream(seed, {12}));
    if (!(g1 == g2)) return fail("same stream produced different estimates");
    return pass();
  }});

  checks.push_back({"retraction-estimator-tangency", [seed] {
    const KpcaProblem problem = small_kpca(seed);
    const ShardOracle oracle(problem, problem.all_indices(), 0);
    RngStream s(seed, {13});
    const ManifoldPoint x = project(problem.manifold(), sample_gaussian(s, problem.dim(), 2));
    const SmoothingConfig cfg{1e-3, 8, EstimatorVariant::RetractionPolar};
    const Matrix g = estimate_gradient(problem.manifold(), x, oracle, cfg, RngStream(seed, {14}));
    if ((tangent_project(x, g) - g).norm() > 1e-10 * g.norm()) {
      return fail("retraction estimate left the tangent space");
    }
    return pass();
  }});

  // Shared small federated run feeding the algebraic identities.
  auto fed_identities = [seed](int n_clients, auto&& per_round) {
    const KpcaProblem problem = small_kpca(seed);
    RunConfig cfg;
    cfg.n_clients = n_clients;
    cfg.rounds = 5;
    cfg.local_steps = 3;
    cfg.eta = 5e-4;
    cfg.eta_g = 1.0;
    cfg.smoothing = {1e-3, 2, EstimatorVariant::Projection};
    cfg.master_seed = seed + 17;
    cfg.batch_size = 2;
    RngStream pstream(cfg.master_seed, {(uint64_t{1} << 31) + 1});
    const Partition part =
        partition_dataset(problem.num_samples(), n_clients, PartitionConfig{}, pstream);
    run_federated(cfg, problem, part, per_round);
  };

  checks.push_back({"correction-sum-zero", [fed_identities] {
    std::optional<std::string> err;
    fed_identities(4, [&](const RoundInfo& info) {
      Matrix sum(info.x_proj.rows(), info.x_proj.cols());
      double scale = 1.0;
      for (const ClientState& c : info.clients) {
        sum += c.correction;
        scale = std::max(scale, c.correction.norm());
      }
      if (sum.norm() > 1e-12 * 4 * scale && !err) {
        err = "round " + std::to_string(info.round) + ": sum " + std::to_string(sum.norm());
      }
    });
    return err;
  }});

  checks.push_back({"correction-closed-form-identity", [fed_identities] {
    // Recursive update equals (1/tau) sum_t mean_i G - (1/tau) sum_t G_i.
    std::optional<std::string> err;
    fed_identities(4, [&](const RoundInfo& info) {
      const int n = static_cast<int>(info.clients.size());
      const int tau = static_cast<int>(info.clients.front().round_history.size());
      Matrix mean_all(info.x_proj.rows(), info.x_proj.cols());
      for (const ClientState& c : info.clients)
        for (const Matrix& g : c.round_history) mean_all += g;
      mean_all *= 1.0 / (static_cast<double>(n) * tau);
      for (const ClientState& c : info.clients) {
        Matrix own(info.x_proj.rows(), info.x_proj.cols());
        for (const Matrix& g : c.round_history) own += g;
        own *= 1.0 / static_cast<double>(tau);
        const Matrix closed = mean_all - own;
        const double scale = std::max(1.0, closed.norm());
        if ((closed - c.correction).norm() > 1e-12 * scale && !err) {
          err = "round " + std::to_string(info.round) + ": closed-form mismatch";
        }
      }
    });
    return err;
  }});

  checks.push_back({"oracle-call-accounting", [fed_identities] {
    // Exactly 2*m*tau*n evaluations per round.
    std::optional<std::string> err;
    long long prev = 0;
    fed_identities(4, [&](const RoundInfo& info) {
      const long long delta = info.oracle_calls - prev;
      prev = info.oracle_calls;
      if (delta != 2LL * 2 * 3 * 4 && !err) {
        err = "round " + std::to_string(info.round) + ": " + std::to_string(delta) + " calls";
      }
    });
    return err;
  }});

  checks.push_back({"single-client-degeneration", [seed] {
    const KpcaProblem problem = small_kpca(seed);
    RunConfig cfg;
    cfg.n_clients = 1;
    cfg.rounds = 8;
    cfg.local_steps = 1;
    cfg.eta = 1e-3;
    cfg.eta_g = 1.0;
    cfg.smoothing = {1e-3, 2, EstimatorVariant::Projection};
    cfg.master_seed = seed + 23;
    cfg.batch_size = 2;
    RngStream pstream(cfg.master_seed, {(uint64_t{1} << 31) + 1});
    const Partition part = partition_dataset(problem.num_samples(), 1, PartitionConfig{}, pstream);
    const FedResult fed = run_federated(cfg, problem, part);
    const FedResult central = run_centralized_zo(cfg, problem);
    const double gap = (fed.final_point.value() - central.final_point.value()).norm();
    if (gap > 1e-12) return fail("trajectory gap " + std::to_string(gap));
    return pass();
  }});

  checks.push_back({"homogeneous-collapse", [seed] {
    // Identical shards + shared streams + eta_g = 1 collapse onto the
    // centralized trajectory.
    const KpcaProblem problem = small_kpca(seed);
    RunConfig cfg;
    cfg.n_clients = 4;
    cfg.rounds = 6;
    cfg.local_steps = 1;
    cfg.eta = 1e-3;
    cfg.eta_g = 1.0;
    cfg.smoothing = {1e-3, 2, EstimatorVariant::Projection};
    cfg.master_seed = seed + 29;
    cfg.batch_size = 2;
    cfg.share_client_streams = true;
    Partition part;
    part.assignment.assign(4, problem.all_indices());
    const FedResult fed = run_federated(cfg, problem, part);

    RunConfig central_cfg = cfg;
    central_cfg.n_clients = 1;
    const FedResult central = run_centralized_zo(central_cfg, problem);
    const double gap = (fed.final_point.value() - central.final_point.value()).norm();
    if (gap > 1e-12) return fail("collapse gap " + std::to_string(gap));
    return pass();
  }});

  checks.push_back({"thread-determinism", [seed] {
    const KpcaProblem problem = small_kpca(seed);
    RunConfig cfg;
    cfg.n_clients = 8;
    cfg.rounds = 4;
    cfg.local_steps = 2;
    cfg.eta = 5e-4;
    cfg.smoothing = {1e-3, 2, EstimatorVariant::Projection};
    cfg.master_seed = seed + 31;
    cfg.batch_size = 2;
    RngStream pstream(cfg.master_seed, {(uint64_t{1} << 31) + 1});
    const Partition part = partition_dataset(problem.num_samples(), 8, PartitionConfig{}, pstream);
    cfg.threads = 1;
    const FedResult a = run_federated(cfg, problem, part);
    cfg.threads = 4;
    const FedResult b = run_federated(cfg, problem, part);
    if (trace_to_csv(a.trace) != trace_to_csv(b.trace)) return fail("traces differ across threads");
    if (!(a.final_point.value() == b.final_point.value())) return fail("final points differ");
    return pass();
  }});

  checks.push_back({"partition-disjoint-cover", [seed] {
    const int n = 103;
    for (PartitionScheme scheme :
         {PartitionScheme::IID, PartitionScheme::SortedShards, PartitionScheme::Dirichlet}) {
      PartitionConfig pc;
      pc.scheme = scheme;
      std::vector<double> keys(n);
      for (int i = 0; i < n; ++i) keys[i] = static_cast<double>((i * 37) % 11);
      RngStream s(seed, {41, static_cast<uint64_t>(scheme)});
      const Partition p = partition_dataset(n, 4, pc, s, &keys);
      std::set<int> seen;
      size_t assigned = 0;
      for (const auto& shard : p.assignment) {
        for (int idx : shard) {
          if (idx < 0 || idx >= n) return fail("index out of range");
          if (!seen.insert(idx).second) return fail("duplicate sample across clients");
        }
        assigned += shard.size();
      }
      for (int idx : p.dropped) {
        if (!seen.insert(idx).second) return fail("dropped sample also assigned");
      }
      if (seen.size() != static_cast<size_t>(n)) return fail("assignment plus dropped != dataset");
      if (scheme == PartitionScheme::Dirichlet && assigned != static_cast<size_t>(n)) {
        return fail("dirichlet must cover every sample");
      }
    }
    return pass();
  }});

  checks.push_back({"kpca-rotation-invariance", [seed] {
    const KpcaProblem problem = small_kpca(seed);
    RngStream s(seed, {43});
    const std::vector<int> all = problem.all_indices();
    for (int i = 0; i < 20; ++i) {
      const ManifoldPoint x = project(problem.manifold(), sample_gaussian(s, problem.dim(), 2));
      const ManifoldPoint q = project(ManifoldKind::stiefel(2, 2), sample_gaussian(s, 2, 2));
      const double fx = problem.value(x.value(), all);
      const double fxq = problem.value(matmul(x.value(), q.value()), all);
      if (std::fabs(fx - fxq) > 1e-12 * (1.0 + std::fabs(fx))) return fail("value not invariant");
    }
    return pass();
  }});

  checks.push_back({"client-decomposition-identity", [seed] {
    // Count-weighted client objectives reassemble the global objective.
    const KpcaProblem problem = small_kpca(seed);
    RngStream s(seed, {47});
    PartitionConfig pc;
    pc.scheme = PartitionScheme::Dirichlet;
    pc.alpha = 0.7;
    const Partition part = partition_dataset(problem.num_samples(), 3, pc, s);
    const ManifoldPoint x = project(problem.manifold(), sample_gaussian(s, problem.dim(), 2));
    double weighted = 0.0;
    int total = 0;
    for (const auto& shard : part.assignment) {
      weighted += static_cast<double>(shard.size()) * problem.value(x.value(), shard);
      total += static_cast<int>(shard.size());
    }
    weighted /= total;
    const double global = problem.value(x.value(), problem.all_indices());
    if (std::fabs(weighted - global) > 1e-12 * (1.0 + std::fabs(global))) {
      return fail("decomposition gap " + std::to_string(std::fabs(weighted - global)));
    }
    return pass();
  }});

  checks.push_back({"descent-lemma-spot-check", [seed] {
    const KpcaProblem problem = small_kpca(seed, 12, 6, 2);
    ConstantEstimates est =
        estimate_constants(problem, {1e-3, 1, EstimatorVariant::Projection}, 200,
                           RngStream(seed, {53}));
    const int violations =
        descent_lemma_violations(problem, 100, 1.5 * est.L, RngStream(seed, {59}));
    if (violations != 0) return fail(std::to_string(violations) + " violations");
    return pass();
  }});

  return checks;
}

}  // namespace

std::vector<SelftestResult> run_selftest(uint64_t seed, bool inject_failure) {
  std::vector<NamedCheck> checks = build_checks(seed);
  if (inject_failure) {
    checks.push_back({"injected-failure-fixture", [] {
      return fail("deliberate tolerance violation (fixture)");
    }});
  }

  std::vector<SelftestResult> results;
  results.reserve(checks.size());
  for (const NamedCheck& check : checks) {
    SelftestResult r;
    r.name = check.name;
    try {
      const std::optional<std::string> err = check.run();
      r.pass = !err.has_value();
      r.detail = err.value_or("");
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace zofed
