#include "zofed/attack.hpp"

#include <algorithm>
#include <cmath>

#include "zofed/csv.hpp"

namespace zofed {

LinearVictim::LinearVictim(Matrix weights, std::vector<double> bias)
    : weights_(std::move(weights)), bias_(std::move(bias)) {
  if (static_cast<int>(bias_.size()) != weights_.rows()) {
    throw DimensionMismatch("victim: bias length must equal class count");
  }
  if (weights_.rows() < 2) throw ConfigError("victim: need at least two classes");
}

LinearVictim LinearVictim::from_weights(Matrix weights, std::vector<double> bias) {
  return LinearVictim(std::move(weights), std::move(bias));
}

LinearVictim LinearVictim::load(const std::string& weights_csv, uint64_t expected_fnv1a) {
  const uint64_t h = fnv1a_file(weights_csv);
  if (h != expected_fnv1a) {
    throw ConfigError("victim asset '" + weights_csv + "' hash mismatch: file was modified");
  }
  const Matrix table = load_matrix_csv(weights_csv);
  if (table.cols() < 3) throw ConfigError("victim asset: expected class,bias,w... columns");

  const int classes = table.rows();
  const int dim = table.cols() - 2;
  Matrix w(classes, dim);
  std::vector<double> b(classes);
  for (int c = 0; c < classes; ++c) {
    if (static_cast<int>(table(c, 0)) != c) {
      throw ConfigError("victim asset: class rows must be ordered 0..K-1");
    }
    b[c] = table(c, 1);
    for (int d = 0; d < dim; ++d) w(c, d) = table(c, d + 2);
  }
  return LinearVictim(std::move(w), std::move(b));
}

std::vector<double> LinearVictim::logits(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) throw DimensionMismatch("victim: input size mismatch");
  std::vector<double> z(classes());
  for (int c = 0; c < classes(); ++c) {
    long double acc = bias_[c];
    for (int d = 0; d < dim(); ++d) acc += static_cast<long double>(weights_(c, d)) * x[d];
    z[c] = static_cast<double>(acc);
  }
  return z;
}

int LinearVictim::predict(std::span<const double> x) const {
  const std::vector<double> z = logits(x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

SphereAttackProblem::SphereAttackProblem(LinearVictim victim, Matrix bases, std::vector<int> labels,
                                         double epsilon, double balance_c)
    : victim_(std::move(victim)),
      bases_(std::move(bases)),
      labels_(std::move(labels)),
      epsilon_(epsilon),
      balance_c_(balance_c),
      manifold_(ManifoldKind::sphere(victim_.dim(), 1)) {
  if (bases_.cols() != victim_.dim()) throw DimensionMismatch("attack: base input dim mismatch");
  if (static_cast<int>(labels_.size()) != bases_.rows()) {
    throw DimensionMismatch("attack: one label per base input required");
  }
  if (epsilon_ <= 0.0) throw ConfigError("attack: epsilon must be positive");
  for (int lbl : labels_) {
    if (lbl < 0 || lbl >= victim_.classes()) throw ConfigError("attack: label out of range");
  }
}

namespace {

// margin = z_true - max_{k != true} z_k and the runner-up class index.
std::pair<double, int> margin_and_runner_up(const std::vector<double>& z, int truth) {
  double best_other = -1e300;
  int runner = -1;
  for (int k = 0; k < static_cast<int>(z.size()); ++k) {
    if (k == truth) continue;
    if (z[k] > best_other) {
      best_other = z[k];
      runner = k;
    }
  }
  return {z[truth] - best_other, runner};
}

}  // namespace

double SphereAttackProblem::value(const Matrix& delta, std::span<const int> sample_indices) const {
  if (sample_indices.empty()) throw ConfigError("attack value: empty index set");
  const int d = victim_.dim();
  std::vector<double> x(d);
  long double acc = 0.0L;
  for (int j : sample_indices) {
    if (j < 0 || j >= num_samples()) throw ConfigError("attack value: index out of range");
    for (int k = 0; k < d; ++k) x[k] = bases_(j, k) + epsilon_ * delta[k];
    const auto [margin, runner] = margin_and_runner_up(victim_.logits(x), labels_[j]);
    (void)runner;
    acc += std::max(0.0, margin);
  }
  return balance_c_ * static_cast<double>(acc / sample_indices.size()) + epsilon_ * epsilon_;
}

Matrix SphereAttackProblem::euclid_grad(const Matrix& delta,
                                        std::span<const int> sample_indices) const {
  if (sample_indices.empty()) throw ConfigError("attack grad: empty index set");
  const int d = victim_.dim();
  std::vector<double> x(d);
  Matrix g(d, 1);
  for (int j : sample_indices) {
    if (j < 0 || j >= num_samples()) throw ConfigError("attack grad: index out of range");
    for (int k = 0; k < d; ++k) x[k] = bases_(j, k) + epsilon_ * delta[k];
    const auto [margin, runner] = margin_and_runner_up(victim_.logits(x), labels_[j]);
    if (margin <= 0.0) continue;  // loss already at its floor for this base
    const int truth = labels_[j];
    for (int k = 0; k < d; ++k) {
      g(k, 0) += epsilon_ * (victim_.weights()(truth, k) - victim_.weights()(runner, k));
    }
  }
  g *= balance_c_ / static_cast<double>(sample_indices.size());
  return g;
}

double SphereAttackProblem::flip_rate(const Matrix& delta) const {
  const int d = victim_.dim();
  std::vector<double> x(d);
  int flipped = 0;
  for (int j = 0; j < num_samples(); ++j) {
    for (int k = 0; k < d; ++k) x[k] = bases_(j, k) + epsilon_ * delta[k];
    if (victim_.predict(x) != labels_[j]) ++flipped;
  }
  return static_cast<double>(flipped) / num_samples();
}

}  // namespace zofed
