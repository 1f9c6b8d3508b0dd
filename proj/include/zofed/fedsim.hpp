#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "zofed/estimator.hpp"
#include "zofed/partition.hpp"
#include "zofed/problem.hpp"
#include "zofed/trace.hpp"

namespace zofed {

// Inputs of the federated run. eta_tilde() = eta_g * eta * local_steps is the
// effective step driving the gradient-mapping metric.
struct RunConfig {
  int n_clients = 1;
  int rounds = 100;      // communication rounds K
  int local_steps = 1;   // tau
  double eta = 1e-2;     // local step size
  std::optional<double> eta_g;  // server step size; defaults to sqrt(n_clients)
  SmoothingConfig smoothing;    // smoothing.mu <= 0 selects the resolved default
  uint64_t master_seed = 1;
  int metric_interval = 1;
  int batch_size = 0;  // oracle minibatch; 0 = full shard (deterministic)
  int threads = 1;
  bool record_walltime = false;  // off by default so traces stay byte-identical
  // Diagnostic: every client draws the same perturbations and samples
  // (stream path uses client id 0), collapsing the run onto one trajectory.
  bool share_client_streams = false;
  std::optional<Matrix> initial_point;

  double eta_g_value() const { return eta_g ? *eta_g : std::sqrt(double(n_clients)); }
  double eta_tilde() const { return eta_g_value() * eta * local_steps; }
};

// Default smoothing radius when none is configured:
// min(1e-4, 1 / (p*r*n*tau*K)), capped by the tube radius.
double resolved_mu(const RunConfig& cfg, const ManifoldKind& m);

// Evolving per-client variables: the drift-correction term c_i, the ambient
// accumulator z_hat, its projection z, and the round's estimator history.
struct ClientState {
  Matrix correction;
  Matrix z_hat;
  ManifoldPoint z;
  std::vector<Matrix> round_history;
};

// The (possibly off-manifold) global model.
struct ServerState {
  Matrix x;
  int round = 1;
};

struct FedResult {
  std::vector<TraceRecord> trace;
  Matrix final_ambient;       // x^{K+1}
  ManifoldPoint final_point;  // P(x^{K+1})
  long long oracle_calls = 0;
  double mu_used = 0.0;
  // Per-iteration timing split, populated by the centralized runner.
  // estimator_ms_per_iter covers estimator construction only (direction
  // sampling, manifold operations, reduction); oracle evaluation time is
  // excluded since both variants issue identical 2m calls per iteration.
  double estimator_ms_per_iter = 0.0;
  double projection_ms_per_iter = 0.0;
};

// One client's tau local steps starting from the broadcast model:
// z_hat <- z_hat - eta*(G + c_i), z <- P(z_hat), with G the zeroth-order
// estimator at z. Throws TubeEscape if any z_hat leaves the gamma tube.
// round_stream must be keyed (client, round); step t spawns child t.
ClientState client_local_round(ClientState client, const ManifoldPoint& x_proj, double eta,
                               int tau, const SmoothingConfig& smoothing,
                               const FunctionOracle& oracle, const RngStream& round_stream);

// x^{k+1} = P(x^k) + eta_g * (mean of client finals - P(x^k)), summed in
// fixed client order.
ServerState server_aggregate(const ServerState& server, const Matrix& x_proj,
                             const std::vector<Matrix>& client_finals, double eta_g);

// c_i^{k+1} = (1/(eta_g*eta*tau)) * (P(x^k) - x^{k+1}) - (1/tau) * sum_t G_t.
Matrix correction_update(const ClientState& client, const Matrix& x_proj, const Matrix& x_next,
                         double eta_g, double eta, int tau);

// Per-round snapshot handed to an observer (tests, selftest).
struct RoundInfo {
  int round;
  const Matrix& x_before;
  const Matrix& x_proj;
  const Matrix& x_after;
  const std::vector<ClientState>& clients;  // corrections already advanced to c^{k+1}
  long long oracle_calls;
};
using RoundObserver = std::function<void(const RoundInfo&)>;

// Full deterministic execution of the federated algorithm. Bit-identical
// across reruns and thread counts for a fixed config.
FedResult run_federated(const RunConfig& cfg, const StochasticProblem& problem,
                        const Partition& partition, const RoundObserver& observer = nullptr);

// Centralized zeroth-order descent x <- P(x - eta * G(x)), one estimator call
// per iteration (rounds = iteration count; local_steps/clients ignored).
// Estimator-construction and projection time are accumulated separately.
FedResult run_centralized_zo(const RunConfig& cfg, const StochasticProblem& problem);

// Centralized projected Riemannian gradient descent with exact gradients:
// x <- P(x - eta_tilde * grad f(x)). Diagnostics and references only.
FedResult run_centralized_rgd(const StochasticProblem& problem, double eta_tilde, int rounds,
                              uint64_t master_seed, const std::optional<Matrix>& x0 = std::nullopt,
                              int metric_interval = 1);

// ||(P(x) - P(P(x) - eta_tilde * grad f(P(x)))) / eta_tilde||^2.
double gradient_mapping_sq(const StochasticProblem& problem, const Matrix& x_ambient,
                           double eta_tilde);

// Empirically sampled stand-ins for the smoothness constants in the step-size
// condition. Estimates, not certificates.
struct ConstantEstimates {
  double M = 1.0;      // projection growth ||P(x+u)-x|| <= M||u||
  double L = 1.0;      // Riemannian gradient Lipschitz constant
  double chi = 1.0;    // gradient norm bound
  double chi_G = 1.0;  // estimator norm bound
  double L_P = 1.0;    // projection second-differential bound (user-supplied)
};

ConstantEstimates estimate_constants(const StochasticProblem& problem, const SmoothingConfig& cfg,
                                     int n_draws, RngStream stream);

// Non-fatal warnings when eta_tilde exceeds
// min{1/(24*M*L), gamma/(6*max(chi_G, chi)), 1/(chi*L_P)}.
std::vector<std::string> step_size_guard(double eta_tilde, double gamma,
                                         const ConstantEstimates& est);

// Counts violations of the projected-step descent inequality over random
// (x, v, eta) triples with x - eta*v inside the tube; expected zero when
// l_hat really upper-bounds the gradient Lipschitz constant.
int descent_lemma_violations(const StochasticProblem& problem, int trials, double l_hat,
                             RngStream stream);

}  // namespace zofed
