#pragma once

#include <span>
#include <utility>
#include <vector>

#include "zofed/manifold.hpp"
#include "zofed/oracle.hpp"

namespace zofed {

// Projection-based zeroth-order Riemannian gradient estimator:
//
//   G = (p*r)/m * sum_j [F(P(x + mu*u_j), xi_j) - F(x, xi_j)] / mu * u_j
//
// with u_j uniform on the unit Frobenius sphere of the ambient space and
// xi_j an independent sample stream per j. Exactly 2m oracle evaluations.
// The result lives in the ambient space, not necessarily in T_x M.
// Requires mu <= gamma (SmoothingOutOfTube otherwise).
Matrix estimate_grad_projection(const ManifoldKind& m, const ManifoldPoint& x,
                                const FunctionOracle& oracle, const SmoothingConfig& cfg,
                                RngStream stream);

// Retraction-based baseline:
//
//   G = 1/m * sum_j [F(Retr_x(mu*u_j), xi_j) - F(x, xi_j)] / mu * u_j
//
// with u_j a standard Gaussian projected onto T_x M and no dimension
// prefactor. Kept exactly in this cited form for comparisons.
Matrix estimate_grad_retraction(const ManifoldKind& m, const ManifoldPoint& x,
                                const FunctionOracle& oracle, const SmoothingConfig& cfg,
                                RngStream stream);

// Dispatch on cfg.variant.
Matrix estimate_gradient(const ManifoldKind& m, const ManifoldPoint& x,
                         const FunctionOracle& oracle, const SmoothingConfig& cfg,
                         RngStream stream);

// Deterministic cores with caller-chosen directions; the public entry points
// sample directions and delegate here. Exposed for closed-form tests.
Matrix estimate_grad_projection_with_directions(const ManifoldKind& m, const ManifoldPoint& x,
                                                const FunctionOracle& oracle, double mu,
                                                std::span<const Matrix> directions,
                                                RngStream stream);
Matrix estimate_grad_retraction_with_directions(const ManifoldKind& m, const ManifoldPoint& x,
                                                const FunctionOracle& oracle, double mu,
                                                std::span<const Matrix> tangent_directions,
                                                RngStream stream);

// For each mu in mu_list: || mean of n_samples single-sample estimates -
// riemannian_gradient(x) ||. Directions and sample streams are shared across
// the mu values (common random numbers). Requires an exact gradient.
std::vector<std::pair<double, double>> probe_bias(const ManifoldKind& m, const ManifoldPoint& x,
                                                  const FunctionOracle& oracle,
                                                  const std::vector<double>& mu_list,
                                                  long n_samples, RngStream stream);

// Empirical E ||G - grad f(x)||^2 over n_repeats independent estimator draws.
double probe_variance(const ManifoldKind& m, const ManifoldPoint& x, const FunctionOracle& oracle,
                      const SmoothingConfig& cfg, long n_repeats, RngStream stream);

// Least-squares slope of log(y) against log(x); used to fit bias/variance
// scaling laws from probe output.
double log_log_slope(std::span<const std::pair<double, double>> points);

}  // namespace zofed
