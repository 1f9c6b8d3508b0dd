#include "zofed/estimator.hpp"

#include <cmath>
#include <string>

namespace zofed {
namespace {

void require_in_tube(const ManifoldKind& m, double mu) {
  if (mu <= 0.0) throw ConfigError("smoothing: mu must be positive");
  if (mu > m.gamma()) {
    throw SmoothingOutOfTube("smoothing: mu " + std::to_string(mu) + " exceeds gamma " +
                             std::to_string(m.gamma()) + " on " + m.name());
  }
}

}  // namespace

Matrix FunctionOracle::exact_euclid_grad(const Matrix&) const {
  throw MissingExactGradient("oracle does not expose an exact Euclidean gradient");
}

Matrix estimate_grad_projection_with_directions(const ManifoldKind& m, const ManifoldPoint& x,
                                                const FunctionOracle& oracle, double mu,
                                                std::span<const Matrix> directions,
                                                RngStream stream) {
  require_in_tube(m, mu);
  const double pr = static_cast<double>(m.ambient_dim());
  Matrix acc(m.rows(), m.cols());
  for (size_t j = 0; j < directions.size(); ++j) {
    const Matrix& u = directions[j];
    const ManifoldPoint perturbed = project(m, x.value() + mu * u);
    RngStream xi = stream.spawn(j).spawn(1);
    const double f_plus = oracle.eval(perturbed.value(), xi);
    const double f_base = oracle.eval(x.value(), xi);
    const double w = (f_plus - f_base) / mu;
    for (int k = 0; k < acc.size(); ++k) acc[k] += w * u[k];
  }
  acc *= pr / static_cast<double>(directions.size());
  acc.require_finite("projection estimator");
  return acc;
}

Matrix estimate_grad_retraction_with_directions(const ManifoldKind& m, const ManifoldPoint& x,
                                                const FunctionOracle& oracle, double mu,
                                                std::span<const Matrix> tangent_directions,
                                                RngStream stream) {
  if (mu <= 0.0) throw ConfigError("smoothing: mu must be positive");
  Matrix acc(m.rows(), m.cols());
  for (size_t j = 0; j < tangent_directions.size(); ++j) {
    const Matrix& u = tangent_directions[j];
    const ManifoldPoint moved = retract_polar(x, mu * u);
    RngStream xi = stream.spawn(j).spawn(1);
    const double f_plus = oracle.eval(moved.value(), xi);
    const double f_base = oracle.eval(x.value(), xi);
    const double w = (f_plus - f_base) / mu;
    for (int k = 0; k < acc.size(); ++k) acc[k] += w * u[k];
  }
  acc *= 1.0 / static_cast<double>(tangent_directions.size());
  acc.require_finite("retraction estimator");
  return acc;
}

Matrix estimate_grad_projection(const ManifoldKind& m, const ManifoldPoint& x,
                                const FunctionOracle& oracle, const SmoothingConfig& cfg,
                                RngStream stream) {
  require_in_tube(m, cfg.mu);
  std::vector<Matrix> dirs;
  dirs.reserve(cfg.m);
  for (int j = 0; j < cfg.m; ++j) {
    RngStream us = stream.spawn(j).spawn(0);
    dirs.push_back(sample_unit_sphere(us, m.rows(), m.cols()));
  }
  return estimate_grad_projection_with_directions(m, x, oracle, cfg.mu, dirs, std::move(stream));
}

Matrix estimate_grad_retraction(const ManifoldKind& m, const ManifoldPoint& x,
                                const FunctionOracle& oracle, const SmoothingConfig& cfg,
                                RngStream stream) {
  std::vector<Matrix> dirs;
  dirs.reserve(cfg.m);
  for (int j = 0; j < cfg.m; ++j) {
    RngStream us = stream.spawn(j).spawn(0);
    dirs.push_back(tangent_project(x, sample_gaussian(us, m.rows(), m.cols())));
  }
  return estimate_grad_retraction_with_directions(m, x, oracle, cfg.mu, dirs, std::move(stream));
}

Matrix estimate_gradient(const ManifoldKind& m, const ManifoldPoint& x,
                         const FunctionOracle& oracle, const SmoothingConfig& cfg,
                         RngStream stream) {
  return cfg.variant == EstimatorVariant::Projection
             ? estimate_grad_projection(m, x, oracle, cfg, std::move(stream))
             : estimate_grad_retraction(m, x, oracle, cfg, std::move(stream));
}

std::vector<std::pair<double, double>> probe_bias(const ManifoldKind& m, const ManifoldPoint& x,
                                                  const FunctionOracle& oracle,
                                                  const std::vector<double>& mu_list,
                                                  long n_samples, RngStream stream) {
  if (!oracle.has_exact_gradient()) {
    throw MissingExactGradient("probe_bias requires an exact-gradient oracle");
  }
  for (double mu : mu_list) require_in_tube(m, mu);
  const Matrix grad = riemannian_gradient(x, oracle.exact_euclid_grad(x.value()));
  const double pr = static_cast<double>(m.ambient_dim());

  std::vector<Matrix> sums(mu_list.size(), Matrix(m.rows(), m.cols()));
  for (long s = 0; s < n_samples; ++s) {
    RngStream cs = stream.spawn(static_cast<uint64_t>(s));
    RngStream us = cs.spawn(0);
    const Matrix u = sample_unit_sphere(us, m.rows(), m.cols());
    const RngStream xi = cs.spawn(1);
    const double f_base = oracle.eval(x.value(), xi);
    for (size_t a = 0; a < mu_list.size(); ++a) {
      const double mu = mu_list[a];
      const double f_plus = oracle.eval(project(m, x.value() + mu * u).value(), xi);
      const double w = pr * (f_plus - f_base) / mu;
      for (int k = 0; k < u.size(); ++k) sums[a][k] += w * u[k];
    }
  }

  std::vector<std::pair<double, double>> out;
  out.reserve(mu_list.size());
  for (size_t a = 0; a < mu_list.size(); ++a) {
    sums[a] *= 1.0 / static_cast<double>(n_samples);
    out.emplace_back(mu_list[a], (sums[a] - grad).norm());
  }
  return out;
}

double probe_variance(const ManifoldKind& m, const ManifoldPoint& x, const FunctionOracle& oracle,
                      const SmoothingConfig& cfg, long n_repeats, RngStream stream) {
  if (!oracle.has_exact_gradient()) {
    throw MissingExactGradient("probe_variance requires an exact-gradient oracle");
  }
  const Matrix grad = riemannian_gradient(x, oracle.exact_euclid_grad(x.value()));
  long double acc = 0.0L;
  for (long rep = 0; rep < n_repeats; ++rep) {
    const Matrix g = estimate_gradient(m, x, oracle, cfg, stream.spawn(static_cast<uint64_t>(rep)));
    const double d = (g - grad).norm();
    acc += static_cast<long double>(d) * d;
  }
  return static_cast<double>(acc / n_repeats);
}

double log_log_slope(std::span<const std::pair<double, double>> points) {
  // Simple least squares on (log x, log y).
  const size_t n = points.size();
  if (n < 2) throw ConfigError("log_log_slope: need at least two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    if (x <= 0.0 || y <= 0.0) throw NumericalFailure("log_log_slope: non-positive point");
    const double lx = std::log(x);
    const double ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw NumericalFailure("log_log_slope: degenerate abscissae");
  return (n * sxy - sx * sy) / denom;
}

}  // namespace zofed
