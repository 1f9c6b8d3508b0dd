#include "zofed/fedsim.hpp"

#include <chrono>
#include <memory>
#include <exception>
#include <string>
#include <thread>

namespace zofed {
namespace {

constexpr uint64_t kServerStreamId = uint64_t{1} << 31;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

Matrix initial_model(const RunConfig& cfg, const ManifoldKind& m) {
  if (cfg.initial_point) {
    ManifoldPoint checked(m, *cfg.initial_point);  // validates membership
    return checked.value();
  }
  RngStream init = RngStream(cfg.master_seed).spawn(kServerStreamId).spawn(0);
  return project(m, sample_gaussian(init, m.rows(), m.cols())).value();
}

// f(P(x^k)) - f* and the gradient-mapping norm at the projected model.
TraceRecord make_record(const StochasticProblem& problem, const Matrix& x_proj, int round,
                        double eta_tilde, double f_star, long long oracle_calls, double wall_ms) {
  TraceRecord rec;
  rec.round = round;
  const std::vector<int> all = problem.all_indices();
  rec.f_gap = problem.value(x_proj, all) - f_star;
  if (problem.has_exact_gradient()) {
    rec.grad_map_sq = gradient_mapping_sq(problem, x_proj, eta_tilde);
  }
  rec.oracle_calls = oracle_calls;
  rec.wall_ms = wall_ms;
  return rec;
}

}  // namespace

double resolved_mu(const RunConfig& cfg, const ManifoldKind& m) {
  if (cfg.smoothing.mu > 0.0) return cfg.smoothing.mu;
  const double denom = static_cast<double>(m.ambient_dim()) * cfg.n_clients * cfg.local_steps *
                       std::max(cfg.rounds, 1);
  return std::min({1e-4, 1.0 / denom, m.gamma()});
}

ClientState client_local_round(ClientState client, const ManifoldPoint& x_proj, double eta,
                               int tau, const SmoothingConfig& smoothing,
                               const FunctionOracle& oracle, const RngStream& round_stream) {
  const ManifoldKind& m = x_proj.manifold();
  if (tau < 1) throw ConfigError("client_local_round: tau must be >= 1");
  client.z_hat = x_proj.value();
  client.z = x_proj;
  client.round_history.clear();
  client.round_history.reserve(tau);

  for (int t = 0; t < tau; ++t) {
    Matrix g = estimate_gradient(m, client.z, oracle, smoothing,
                                 round_stream.spawn(static_cast<uint64_t>(t)));
    Matrix step = g + client.correction;
    step *= eta;
    client.z_hat -= step;
    ManifoldPoint proj = project(m, client.z_hat);
    const double dist = (client.z_hat - proj.value()).norm();
    if (dist > m.gamma()) {
      throw TubeEscape("local step " + std::to_string(t) + ": iterate left the tube (dist " +
                       std::to_string(dist) + " > gamma " + std::to_string(m.gamma()) + ")");
    }
    client.z = std::move(proj);
    client.round_history.push_back(std::move(g));
  }
  return client;
}

ServerState server_aggregate(const ServerState& server, const Matrix& x_proj,
                             const std::vector<Matrix>& client_finals, double eta_g) {
  if (client_finals.empty()) throw ConfigError("server_aggregate: no client results");
  Matrix mean(x_proj.rows(), x_proj.cols());
  for (const Matrix& z : client_finals) {
    if (z.rows() != x_proj.rows() || z.cols() != x_proj.cols()) {
      throw DimensionMismatch("server_aggregate: client result shape mismatch");
    }
    mean += z;
  }
  mean *= 1.0 / static_cast<double>(client_finals.size());
  ServerState next;
  next.x = x_proj + eta_g * (mean - x_proj);
  next.round = server.round + 1;
  return next;
}

Matrix correction_update(const ClientState& client, const Matrix& x_proj, const Matrix& x_next,
                         double eta_g, double eta, int tau) {
  Matrix c = x_proj - x_next;
  c *= 1.0 / (eta_g * eta * static_cast<double>(tau));
  Matrix mean_g(x_proj.rows(), x_proj.cols());
  for (const Matrix& g : client.round_history) mean_g += g;
  mean_g *= 1.0 / static_cast<double>(tau);
  c -= mean_g;
  return c;
}

FedResult run_federated(const RunConfig& cfg, const StochasticProblem& problem,
                        const Partition& partition, const RoundObserver& observer) {
  const ManifoldKind& m = problem.manifold();
  const int n = partition.n_clients();
  if (n != cfg.n_clients) throw ConfigError("run_federated: partition size != n_clients");
  if (cfg.rounds < 0 || cfg.local_steps < 1 || cfg.metric_interval < 1 || cfg.threads < 1) {
    throw ConfigError("run_federated: invalid run parameters");
  }
  if (cfg.eta <= 0.0) throw ConfigError("run_federated: eta must be positive");

  SmoothingConfig smoothing = cfg.smoothing;
  smoothing.mu = resolved_mu(cfg, m);
  if (smoothing.variant == EstimatorVariant::Projection && smoothing.mu > m.gamma()) {
    throw SmoothingOutOfTube("run_federated: mu exceeds the tube radius gamma");
  }

  std::vector<std::unique_ptr<ShardOracle>> oracles;
  oracles.reserve(n);
  for (int i = 0; i < n; ++i) {
    oracles.push_back(std::make_unique<ShardOracle>(problem, partition.assignment[i], cfg.batch_size));
  }

  const double eta_g = cfg.eta_g_value();
  const double eta_tilde = cfg.eta_tilde();
  const double f_star = problem.reference_value().value_or(0.0);
  const RngStream root(cfg.master_seed);
  const auto t0 = Clock::now();

  ServerState server{initial_model(cfg, m), 1};
  std::vector<ClientState> clients;
  clients.reserve(n);
  {
    const ManifoldPoint start = project(m, server.x);
    for (int i = 0; i < n; ++i) {
      clients.push_back(ClientState{Matrix(m.rows(), m.cols()), start.value(), start, {}});
    }
  }

  auto total_calls = [&]() {
    long long total = 0;
    for (const auto& o : oracles) total += o->eval_count();
    return total;
  };

  FedResult out{{}, server.x, project(m, server.x), 0, smoothing.mu, 0.0, 0.0};

  for (int k = 1; k <= cfg.rounds; ++k) {
    // Tube check on the incoming server model, then broadcast its projection.
    const ManifoldPoint x_proj = project(m, server.x);
    const double server_dist = (server.x - x_proj.value()).norm();
    if (server_dist > m.gamma()) {
      throw TubeEscape("round " + std::to_string(k) + ": server model left the tube (dist " +
                       std::to_string(server_dist) + " > gamma " + std::to_string(m.gamma()) + ")");
    }

    if ((k - 1) % cfg.metric_interval == 0) {
      out.trace.push_back(make_record(problem, x_proj.value(), k, eta_tilde, f_star, total_calls(),
                                      cfg.record_walltime ? ms_since(t0) : 0.0));
    }

    // tau local steps on every client, in parallel. Each client owns its
    // state and stream; results land in fixed slots so the later reduction
    // order is independent of scheduling.
    auto run_client = [&](int i) {
      const uint64_t stream_id = cfg.share_client_streams ? 0 : static_cast<uint64_t>(i);
      const RngStream round_stream = root.spawn(stream_id).spawn(static_cast<uint64_t>(k));
      const std::string where = "round " + std::to_string(k) + " client " + std::to_string(i);
      try {
        clients[i] = client_local_round(std::move(clients[i]), x_proj, cfg.eta, cfg.local_steps,
                                        smoothing, *oracles[i], round_stream);
      } catch (const TubeEscape& e) {
        throw TubeEscape(where + ", " + e.what());
      } catch (const DegenerateProjection& e) {
        throw DegenerateProjection(where + ": " + e.what());
      }
    };

    if (cfg.threads == 1 || n == 1) {
      for (int i = 0; i < n; ++i) run_client(i);
    } else {
      const int workers = std::min(cfg.threads, n);
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (int i = w; i < n; i += workers) run_client(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (std::thread& t : pool) t.join();
      for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }

    std::vector<Matrix> finals;
    finals.reserve(n);
    for (const ClientState& st : clients) finals.push_back(st.z_hat);
    const ServerState next = server_aggregate(server, x_proj.value(), finals, eta_g);

    for (ClientState& st : clients) {
      st.correction =
          correction_update(st, x_proj.value(), next.x, eta_g, cfg.eta, cfg.local_steps);
    }

    if (observer) {
      observer(RoundInfo{k, server.x, x_proj.value(), next.x, clients, total_calls()});
    }
    server = next;
  }

  out.final_ambient = server.x;
  out.final_point = project(m, server.x);
  {
    const double final_dist = (server.x - out.final_point.value()).norm();
    if (final_dist > m.gamma()) {
      throw TubeEscape("final server model left the tube (dist " + std::to_string(final_dist) +
                       ")");
    }
  }
  out.oracle_calls = total_calls();
  if (cfg.rounds >= 1) {
    out.trace.push_back(make_record(problem, out.final_point.value(), cfg.rounds + 1, eta_tilde,
                                    f_star, out.oracle_calls,
                                    cfg.record_walltime ? ms_since(t0) : 0.0));
  }
  return out;
}

namespace {

// Forwards evaluations while accumulating the time spent inside the oracle,
// so estimator-construction time (sampling, projections, reduction) can be
// separated from evaluation cost. Single-threaded use only.
class TimedOracle : public FunctionOracle {
 public:
  explicit TimedOracle(const FunctionOracle& inner) : inner_(inner) {}
  bool has_exact_gradient() const override { return inner_.has_exact_gradient(); }
  Matrix exact_euclid_grad(const Matrix& p) const override { return inner_.exact_euclid_grad(p); }
  double eval_ms() const { return eval_ms_; }

 protected:
  double do_eval(const Matrix& point, RngStream stream) const override {
    const auto t0 = Clock::now();
    const double v = inner_.eval(point, std::move(stream));
    eval_ms_ += ms_since(t0);
    return v;
  }

 private:
  const FunctionOracle& inner_;
  mutable double eval_ms_ = 0.0;
};

}  // namespace

FedResult run_centralized_zo(const RunConfig& cfg, const StochasticProblem& problem) {
  const ManifoldKind& m = problem.manifold();
  if (cfg.rounds < 0 || cfg.metric_interval < 1) {
    throw ConfigError("run_centralized_zo: invalid run parameters");
  }
  SmoothingConfig smoothing = cfg.smoothing;
  {
    RunConfig single = cfg;
    single.n_clients = 1;
    single.local_steps = 1;
    smoothing.mu = resolved_mu(single, m);
  }

  const ShardOracle oracle(problem, problem.all_indices(), cfg.batch_size);
  const TimedOracle timed(oracle);
  const double f_star = problem.reference_value().value_or(0.0);
  const RngStream root(cfg.master_seed);
  const auto t0 = Clock::now();

  Matrix x = initial_model(cfg, m);
  ManifoldPoint x_point = project(m, x);
  double estimator_ms = 0.0;
  double projection_ms = 0.0;

  FedResult out{{}, x, x_point, 0, smoothing.mu, 0.0, 0.0};

  for (int k = 1; k <= cfg.rounds; ++k) {
    if ((k - 1) % cfg.metric_interval == 0) {
      out.trace.push_back(make_record(problem, x_point.value(), k, cfg.eta, f_star,
                                      oracle.eval_count(),
                                      cfg.record_walltime ? ms_since(t0) : 0.0));
    }

    const RngStream step_stream = root.spawn(0).spawn(static_cast<uint64_t>(k)).spawn(0);
    const auto t_est = Clock::now();
    const double eval_ms_before = timed.eval_ms();
    const Matrix g = estimate_gradient(m, x_point, timed, smoothing, step_stream);
    // Construction cost only: both variants make the same 2m oracle calls,
    // so evaluation time is excluded from the comparison.
    estimator_ms += ms_since(t_est) - (timed.eval_ms() - eval_ms_before);

    Matrix step = g;
    step *= cfg.eta;
    x = x_point.value() - step;

    const auto t_proj = Clock::now();
    ManifoldPoint next = project(m, x);
    projection_ms += ms_since(t_proj);

    if ((x - next.value()).norm() > m.gamma()) {
      throw TubeEscape("centralized iteration " + std::to_string(k) + ": iterate left the tube");
    }
    x_point = std::move(next);
  }

  out.final_ambient = x;
  out.final_point = x_point;
  out.oracle_calls = oracle.eval_count();
  if (cfg.rounds >= 1) {
    out.trace.push_back(make_record(problem, x_point.value(), cfg.rounds + 1, cfg.eta, f_star,
                                    out.oracle_calls, cfg.record_walltime ? ms_since(t0) : 0.0));
    out.estimator_ms_per_iter = estimator_ms / cfg.rounds;
    out.projection_ms_per_iter = projection_ms / cfg.rounds;
  }
  return out;
}

FedResult run_centralized_rgd(const StochasticProblem& problem, double eta_tilde, int rounds,
                              uint64_t master_seed, const std::optional<Matrix>& x0,
                              int metric_interval) {
  const ManifoldKind& m = problem.manifold();
  if (eta_tilde <= 0.0) throw ConfigError("run_centralized_rgd: eta_tilde must be positive");
  const std::vector<int> all = problem.all_indices();
  const double f_star = problem.reference_value().value_or(0.0);

  Matrix x;
  if (x0) {
    x = ManifoldPoint(m, *x0).value();
  } else {
    RngStream init = RngStream(master_seed).spawn(kServerStreamId).spawn(0);
    x = project(m, sample_gaussian(init, m.rows(), m.cols())).value();
  }
  ManifoldPoint x_point = ManifoldPoint::trusted(m, x);

  FedResult out{{}, x, x_point, 0, 0.0, 0.0, 0.0};
  for (int k = 1; k <= rounds; ++k) {
    if ((k - 1) % metric_interval == 0) {
      out.trace.push_back(make_record(problem, x_point.value(), k, eta_tilde, f_star, 0, 0.0));
    }
    const Matrix grad = riemannian_gradient(x_point, problem.euclid_grad(x_point.value(), all));
    Matrix step = grad;
    step *= eta_tilde;
    x_point = project(m, x_point.value() - step);
  }
  out.final_ambient = x_point.value();
  out.final_point = x_point;
  if (rounds >= 1) {
    out.trace.push_back(
        make_record(problem, x_point.value(), rounds + 1, eta_tilde, f_star, 0, 0.0));
  }
  return out;
}

double gradient_mapping_sq(const StochasticProblem& problem, const Matrix& x_ambient,
                           double eta_tilde) {
  if (!problem.has_exact_gradient()) {
    throw MissingExactGradient("gradient_mapping_sq needs the exact gradient");
  }
  const ManifoldKind& m = problem.manifold();
  const ManifoldPoint y = project(m, x_ambient);
  const std::vector<int> all = problem.all_indices();
  const Matrix grad = riemannian_gradient(y, problem.euclid_grad(y.value(), all));
  Matrix step = grad;
  step *= eta_tilde;
  const ManifoldPoint moved = project(m, y.value() - step);
  const double g = (y.value() - moved.value()).norm() / eta_tilde;
  return g * g;
}

ConstantEstimates estimate_constants(const StochasticProblem& problem, const SmoothingConfig& cfg,
                                     int n_draws, RngStream stream) {
  const ManifoldKind& m = problem.manifold();
  const std::vector<int> all = problem.all_indices();
  const ShardOracle oracle(problem, all, 0);
  SmoothingConfig single = cfg;
  single.m = 1;
  if (single.mu <= 0.0) single.mu = 1e-4;

  ConstantEstimates est;
  est.M = 0.0;
  est.L = 0.0;
  est.chi = 0.0;
  est.chi_G = 0.0;

  RngStream point_stream = stream.spawn(0);
  RngStream draw_stream = stream.spawn(1);
  ManifoldPoint prev = project(m, sample_gaussian(point_stream, m.rows(), m.cols()));
  Matrix prev_grad = riemannian_gradient(prev, problem.euclid_grad(prev.value(), all));

  for (int d = 0; d < n_draws; ++d) {
    const ManifoldPoint x = project(m, sample_gaussian(point_stream, m.rows(), m.cols()));
    const Matrix euclid = problem.euclid_grad(x.value(), all);
    est.chi = std::max(est.chi, euclid.norm());

    const Matrix grad = riemannian_gradient(x, euclid);
    const double gap = (x.value() - prev.value()).norm();
    if (gap > 1e-9) est.L = std::max(est.L, (grad - prev_grad).norm() / gap);

    RngStream ds = draw_stream.spawn(static_cast<uint64_t>(d));
    RngStream us = ds.spawn(0);
    const Matrix u = sample_unit_sphere(us, m.rows(), m.cols());
    const ManifoldPoint moved = project(m, x.value() + single.mu * u);
    est.M = std::max(est.M, (moved.value() - x.value()).norm() / single.mu);

    const Matrix g = estimate_gradient(m, x, oracle, single, ds.spawn(1));
    est.chi_G = std::max(est.chi_G, g.norm());

    prev = x;
    prev_grad = grad;
  }
  if (est.M == 0.0) est.M = 1.0;
  if (est.L == 0.0) est.L = 1.0;
  return est;
}

std::vector<std::string> step_size_guard(double eta_tilde, double gamma,
                                         const ConstantEstimates& est) {
  std::vector<std::string> warnings;
  const auto warn = [&](const std::string& label, double bound) {
    if (eta_tilde > bound) {
      warnings.push_back("step-size guard: eta_tilde " + std::to_string(eta_tilde) + " exceeds " +
                         label + " = " + std::to_string(bound) + " (estimated constants)");
    }
  };
  warn("1/(24*M*L)", 1.0 / (24.0 * est.M * est.L));
  warn("gamma/(6*max(chi_G,chi))", gamma / (6.0 * std::max(est.chi_G, est.chi)));
  warn("1/(chi*L_P)", 1.0 / (est.chi * est.L_P));
  return warnings;
}

int descent_lemma_violations(const StochasticProblem& problem, int trials, double l_hat,
                             RngStream stream) {
  const ManifoldKind& m = problem.manifold();
  const std::vector<int> all = problem.all_indices();
  const double gamma = m.gamma();
  int violations = 0;

  for (int t = 0; t < trials; ++t) {
    RngStream ts = stream.spawn(static_cast<uint64_t>(t));
    RngStream xs = ts.spawn(0);
    const ManifoldPoint x = project(m, sample_gaussian(xs, m.rows(), m.cols()));
    RngStream vs = ts.spawn(1);
    Matrix v = sample_gaussian(vs, m.rows(), m.cols());

    // Scale eta so the perturbed point stays safely inside the gamma tube.
    RngStream es = ts.spawn(2);
    const double eta = (0.1 + 0.8 * es.next_uniform()) * 0.9 * gamma / std::max(v.norm(), 1e-12);

    Matrix step = v;
    step *= eta;
    const ManifoldPoint x_plus = project(m, x.value() - step);
    const Matrix grad = riemannian_gradient(x, problem.euclid_grad(x.value(), all));

    const double f_plus = problem.value(x_plus.value(), all);
    const double f_x = problem.value(x.value(), all);
    const double move_sq = std::pow((x_plus.value() - x.value()).norm(), 2);
    // z = x in the descent inequality.
    const double rhs = f_x + dot(grad - v, x_plus.value() - x.value()) -
                       (1.0 / eta) * move_sq + (3.0 * v.norm() / (4.0 * gamma)) * move_sq +
                       0.5 * l_hat * move_sq;
    if (f_plus > rhs + 1e-9 * (1.0 + std::fabs(rhs))) ++violations;
  }
  return violations;
}

}  // namespace zofed
