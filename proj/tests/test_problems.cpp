#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "zofed/attack.hpp"
#include "zofed/csv.hpp"
#include "zofed/fedsim.hpp"
#include "zofed/kpca.hpp"
#include "zofed/lowrank.hpp"
#include "zofed/partition.hpp"

using namespace zofed;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("zofed_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

LinearVictim tiny_victim() {
  // Three classes in R^4 with well separated weight rows.
  Matrix w(3, 4);
  const double rows[3][4] = {{1.0, 0.5, 0.0, -0.2}, {-0.8, 0.9, 0.3, 0.0}, {0.1, -1.0, 0.7, 0.4}};
  for (int c = 0; c < 3; ++c)
    for (int d = 0; d < 4; ++d) w(c, d) = rows[c][d];
  return LinearVictim::from_weights(w, {0.1, -0.05, 0.0});
}

}  // namespace

TEST_CASE("kpca: identity covariances give -r/2") {
  std::vector<Matrix> h{Matrix::identity(3), Matrix::identity(3)};
  const KpcaProblem problem = KpcaProblem::from_covariances(std::move(h), 2);
  RngStream s(1, {0});
  const ManifoldPoint x = project(problem.manifold(), sample_gaussian(s, 3, 2));
  CHECK(problem.value(x.value(), problem.all_indices()) == doctest::Approx(-1.0).epsilon(1e-13));
}

TEST_CASE("kpca: diagonal covariance with coordinate frame") {
  Matrix h(4, 4);
  const double lam[4] = {5.0, 3.0, 2.0, 0.5};
  for (int i = 0; i < 4; ++i) h(i, i) = lam[i];
  const KpcaProblem problem = KpcaProblem::from_covariances({h}, 2);
  Matrix x(4, 2);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  CHECK(problem.value(x, problem.all_indices()) == doctest::Approx(-4.0).epsilon(1e-14));
}

TEST_CASE("kpca value and gradient match naive loop recomputation") {
  RngStream s(3, {0});
  const SyntheticBlobs blobs = make_synthetic_blobs(10, 5, 2, 2.0, s);
  const KpcaProblem problem = KpcaProblem::from_samples(blobs.samples, 2);
  const Matrix x = project(problem.manifold(), sample_gaussian(s, 5, 2)).value();
  const std::vector<int> idx{1, 4, 7};

  long double naive = 0.0L;
  Matrix naive_grad(5, 2);
  for (int j : idx) {
    const Matrix& h = problem.covariance(j);
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b)
        for (int c = 0; c < 2; ++c) {
          naive += x(a, c) * h(a, b) * x(b, c);
          naive_grad(a, c) += h(a, b) * x(b, c);
        }
  }
  const double expected = static_cast<double>(-naive / (2.0 * idx.size()));
  naive_grad *= -1.0 / static_cast<double>(idx.size());

  CHECK(problem.value(x, idx) == doctest::Approx(expected).epsilon(1e-12));
  CHECK((problem.euclid_grad(x, idx) - naive_grad).norm() <= 1e-12 * (1.0 + naive_grad.norm()));
  CHECK_THROWS_AS(problem.value(x, std::vector<int>{99}), ConfigError);
}

TEST_CASE("kpca gradient: identity data and finite differences") {
  std::vector<Matrix> h{Matrix::identity(4)};
  const KpcaProblem problem = KpcaProblem::from_covariances(std::move(h), 2);
  RngStream s(5, {0});
  const Matrix x = project(problem.manifold(), sample_gaussian(s, 4, 2)).value();
  CHECK((problem.euclid_grad(x, problem.all_indices()) + x).norm() <= 1e-13);

  const SyntheticBlobs blobs = make_synthetic_blobs(8, 4, 1, 1.5, s);
  const KpcaProblem rich = KpcaProblem::from_samples(blobs.samples, 2);
  const Matrix y = project(rich.manifold(), sample_gaussian(s, 4, 2)).value();
  const Matrix grad = rich.euclid_grad(y, rich.all_indices());
  const double h_step = 1e-5;
  for (int k = 0; k < y.size(); ++k) {
    Matrix plus = y, minus = y;
    plus[k] += h_step;
    minus[k] -= h_step;
    const double fd = (rich.value(plus, rich.all_indices()) -
                       rich.value(minus, rich.all_indices())) /
                      (2.0 * h_step);
    CHECK(fd == doctest::Approx(grad[k]).epsilon(1e-4));
  }
}

TEST_CASE("kpca reference optimum: spectral certificate") {
  Matrix h1(3, 3), h2(3, 3);
  const double a[3] = {6.0, 2.0, 1.0};
  const double b[3] = {4.0, 4.0, 1.0};
  for (int i = 0; i < 3; ++i) {
    h1(i, i) = a[i];
    h2(i, i) = b[i];
  }
  // Average is diag(5,3,1): f* = -(5+3)/2 = -4.
  const KpcaProblem problem = KpcaProblem::from_covariances({h1, h2}, 2);
  const auto [f_star, x_star] = problem.reference_optimum();
  CHECK(f_star == doctest::Approx(-4.0).epsilon(1e-13));
  CHECK(problem.value(x_star, problem.all_indices()) == doctest::Approx(f_star).epsilon(1e-10));

  RngStream s(7, {0});
  for (int i = 0; i < 100; ++i) {
    const Matrix x = project(problem.manifold(), sample_gaussian(s, 3, 2)).value();
    CHECK(problem.value(x, problem.all_indices()) >= f_star - 1e-10);
  }
  CHECK(gradient_mapping_sq(problem, x_star, 0.05) <= 1e-6);
}

TEST_CASE("kpca rejects asymmetric covariances") {
  Matrix bad(2, 2);
  bad(0, 1) = 1.0;  // not symmetric
  CHECK_THROWS_AS(KpcaProblem::from_covariances({bad}, 1), ConfigError);
}

TEST_CASE("attack value: loss floor, null direction, naive recomputation") {
  const LinearVictim victim = tiny_victim();
  RngStream s(11, {0});
  Matrix bases(3, 4);
  std::vector<int> labels(3);
  // Build bases that the victim classifies as their label with margin.
  int filled = 0;
  while (filled < 3) {
    Matrix cand = sample_gaussian(s, 1, 4);
    std::vector<double> row(4);
    for (int k = 0; k < 4; ++k) row[k] = 2.0 * cand(0, k);
    const int pred = victim.predict(row);
    const std::vector<double> z = victim.logits(row);
    double other = -1e300;
    for (int c = 0; c < 3; ++c)
      if (c != pred) other = std::max(other, z[c]);
    if (z[pred] - other < 0.5) continue;
    for (int k = 0; k < 4; ++k) bases(filled, k) = row[k];
    labels[filled] = pred;
    ++filled;
  }
  const double eps = 2.0;
  const SphereAttackProblem problem(victim, bases, labels, eps, 1.0);

  // A strongly adversarial direction for base 0: push toward the runner-up.
  {
    std::vector<double> row(4);
    for (int k = 0; k < 4; ++k) row[k] = bases(0, k);
    const std::vector<double> z = victim.logits(row);
    int runner = -1;
    double other = -1e300;
    for (int c = 0; c < 3; ++c) {
      if (c == labels[0]) continue;
      if (z[c] > other) {
        other = z[c];
        runner = c;
      }
    }
    Matrix delta(4, 1);
    for (int k = 0; k < 4; ++k) {
      delta(k, 0) = victim.weights()(runner, k) - victim.weights()(labels[0], k);
    }
    delta *= 1.0 / delta.norm();
    // Blow past the margin: with eps = 2 and this victim the margin flips.
    const std::vector<int> only0{0};
    const double val = problem.value(delta, only0);
    CHECK(val == doctest::Approx(eps * eps).epsilon(1e-12));
    CHECK(problem.flip_rate(delta) >= 1.0 / 3.0);
  }

  // Direction orthogonal to every weight row leaves the logits unchanged.
  {
    // Orthonormal basis of the weight row space, then remove it from delta.
    std::vector<Matrix> basis;
    for (int c = 0; c < 3; ++c) {
      Matrix w_row(4, 1);
      for (int k = 0; k < 4; ++k) w_row(k, 0) = victim.weights()(c, k);
      for (const Matrix& b : basis) w_row -= dot(w_row, b) * b;
      REQUIRE(w_row.norm() > 1e-9);
      w_row *= 1.0 / w_row.norm();
      basis.push_back(w_row);
    }
    Matrix delta(4, 1);
    delta(3, 0) = 1.0;  // start anywhere
    for (const Matrix& b : basis) delta -= dot(delta, b) * b;
    REQUIRE(delta.norm() > 1e-6);  // 3 rows in R^4 leave a null direction
    delta *= 1.0 / delta.norm();

    std::vector<double> row(4);
    long double clean = 0.0L;
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 4; ++k) row[k] = bases(j, k);
      const std::vector<double> z = victim.logits(row);
      double other = -1e300;
      for (int c = 0; c < 3; ++c)
        if (c != labels[j]) other = std::max(other, z[c]);
      clean += std::max(0.0, z[labels[j]] - other);
    }
    const double expected = static_cast<double>(clean / 3.0) + eps * eps;
    CHECK(problem.value(delta, problem.all_indices()) ==
          doctest::Approx(expected).epsilon(1e-10));
  }

  // Naive recomputation at a random unit delta.
  {
    Matrix delta = sample_unit_sphere(s, 4, 1);
    long double naive = 0.0L;
    std::vector<double> row(4);
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 4; ++k) row[k] = bases(j, k) + eps * delta(k, 0);
      const std::vector<double> z = victim.logits(row);
      double other = -1e300;
      for (int c = 0; c < 3; ++c)
        if (c != labels[j]) other = std::max(other, z[c]);
      naive += std::max(0.0, z[labels[j]] - other);
    }
    const double expected = static_cast<double>(naive / 3.0) + eps * eps;
    CHECK(problem.value(delta, problem.all_indices()) ==
          doctest::Approx(expected).epsilon(1e-12));
  }

  // Subgradient matches finite differences away from kinks.
  {
    Matrix delta = sample_unit_sphere(s, 4, 1);
    const Matrix grad = problem.euclid_grad(delta, problem.all_indices());
    const double h = 1e-7;
    for (int k = 0; k < 4; ++k) {
      Matrix plus = delta, minus = delta;
      plus(k, 0) += h;
      minus(k, 0) -= h;
      const double fd = (problem.value(plus, problem.all_indices()) -
                         problem.value(minus, problem.all_indices())) /
                        (2.0 * h);
      CHECK(fd == doctest::Approx(grad(k, 0)).epsilon(1e-5));
    }
  }
}

TEST_CASE("victim asset loading verifies the pinned hash") {
  TempDir tmp;
  const std::string path = tmp.file("victim.csv");
  write_text(path, "class,bias,w0,w1\n0,0.0,1.0,0.0\n1,0.0,0.0,1.0\n");
  const uint64_t good = fnv1a_file(path);
  const LinearVictim v = LinearVictim::load(path, good);
  CHECK(v.dim() == 2);
  CHECK(v.classes() == 2);
  CHECK_THROWS_AS(LinearVictim::load(path, good + 1), ConfigError);
}

TEST_CASE("lowrank: ground truth with zero noise has zero loss") {
  RngStream s(13, {0});
  const auto problem = LowRankRegressionProblem::synthetic(4, 3, 2, 12, 0.0, 0.2, s);
  CHECK(problem.value(problem.ground_truth(), problem.all_indices()) <= 1e-24);
  CHECK(check_membership(problem.manifold(), problem.ground_truth()) <= 1e-12);
}

TEST_CASE("lowrank gradient: finite differences and a hand-expanded 2x2 case") {
  RngStream s(15, {0});
  const auto problem = LowRankRegressionProblem::synthetic(3, 3, 2, 10, 0.05, 0.2, s);
  const Matrix x = sample_gaussian(s, 3, 3);
  const Matrix grad = problem.euclid_grad(x, problem.all_indices());
  const double h = 1e-6;
  for (int k = 0; k < x.size(); ++k) {
    Matrix plus = x, minus = x;
    plus[k] += h;
    minus[k] -= h;
    const double fd = (problem.value(plus, problem.all_indices()) -
                       problem.value(minus, problem.all_indices())) /
                      (2.0 * h);
    CHECK(fd == doctest::Approx(grad[k]).epsilon(1e-4));
  }

  // Single-sample 2x2 case, expanded symbolically:
  // value = (a00 x00 + a01 x01 + a10 x10 + a11 x11 - y)^2, grad = 2*res*a.
  const auto single = LowRankRegressionProblem::synthetic(2, 2, 1, 1, 0.3, 0.2, s);
  const Matrix z = sample_gaussian(s, 2, 2);
  const std::vector<int> idx{0};
  const Matrix& a = single.design(0);
  const double res = a(0, 0) * z(0, 0) + a(0, 1) * z(0, 1) + a(1, 0) * z(1, 0) +
                     a(1, 1) * z(1, 1) - single.target(0);
  CHECK(single.value(z, idx) == doctest::Approx(res * res).epsilon(1e-12));
  const Matrix g = single.euclid_grad(z, idx);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      CHECK(g(i, j) == doctest::Approx(2.0 * res * a(i, j)).epsilon(1e-12));
    }
}

TEST_CASE("csv loader: literal values, header detection, round trip") {
  TempDir tmp;
  const std::string plain = tmp.file("plain.csv");
  write_text(plain, "1.5,2\n3,4.25\n");
  const Matrix m = load_matrix_csv(plain);
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) == 1.5);
  CHECK(m(1, 1) == 4.25);

  const std::string with_header = tmp.file("header.csv");
  write_text(with_header, "alpha,beta\n1.5,2\n3,4.25\n");
  CHECK(load_matrix_csv(with_header) == m);

  RngStream s(17, {0});
  const Matrix rand = sample_gaussian(s, 7, 3);
  const std::string rt = tmp.file("roundtrip.csv");
  write_matrix_csv(rt, rand);
  CHECK(load_matrix_csv(rt) == rand);
  CHECK_FALSE(fs::exists(rt + ".tmp"));
}

TEST_CASE("csv loader error taxonomy") {
  TempDir tmp;
  CHECK_THROWS_AS(load_matrix_csv(tmp.file("missing.csv")), IoError);

  const std::string ragged = tmp.file("ragged.csv");
  write_text(ragged, "1,2\n3\n");
  CHECK_THROWS_AS(load_matrix_csv(ragged), RaggedRows);

  const std::string bad = tmp.file("bad.csv");
  write_text(bad, "1,2\n3,oops\n");
  try {
    load_matrix_csv(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.col == 2);
  }
}

TEST_CASE("partition: single client and exact IID dealing") {
  RngStream s(19, {0});
  const Partition solo = partition_dataset(10, 1, PartitionConfig{}, s);
  CHECK(solo.assignment.size() == 1);
  CHECK(solo.assignment[0].size() == 10);
  CHECK(solo.dropped.empty());

  const Partition quad = partition_dataset(100, 4, PartitionConfig{}, s);
  for (const auto& shard : quad.assignment) CHECK(shard.size() == 25);
  CHECK(quad.dropped.empty());
}

TEST_CASE("partition: sorted shards group by key") {
  PartitionConfig pc;
  pc.scheme = PartitionScheme::SortedShards;
  pc.shards_per_client = 1;
  std::vector<double> keys(12);
  for (int i = 0; i < 12; ++i) keys[i] = static_cast<double>(11 - i);  // reversed order
  RngStream s(21, {0});
  const Partition p = partition_dataset(12, 3, pc, s, &keys);
  // Each client holds one contiguous run of the sorted order (here: reversed
  // indices), so the spread of keys within a client is small.
  for (const auto& shard : p.assignment) {
    REQUIRE(shard.size() == 4);
    double lo = 1e300, hi = -1e300;
    for (int idx : shard) {
      lo = std::min(lo, keys[idx]);
      hi = std::max(hi, keys[idx]);
    }
    CHECK(hi - lo == doctest::Approx(3.0));
  }
  CHECK_THROWS_AS(partition_dataset(12, 3, pc, s, nullptr), ConfigError);
}

TEST_CASE("partition: dirichlet size heterogeneity dominates IID") {
  PartitionConfig dir;
  dir.scheme = PartitionScheme::Dirichlet;
  dir.alpha = 0.1;
  double dirichlet_var = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    RngStream s(1000 + seed, {0});
    const Partition p = partition_dataset(10000, 4, dir, s);
    double mean = 10000.0 / 4.0;
    size_t total = 0;
    for (const auto& shard : p.assignment) {
      dirichlet_var += std::pow(static_cast<double>(shard.size()) - mean, 2);
      total += shard.size();
    }
    CHECK(total == 10000);
  }
  dirichlet_var /= 400.0;
  // IID dealing is exactly equal-sized, variance zero; require a wide gap.
  CHECK(dirichlet_var > 1000.0);
}

TEST_CASE("partition parameter validation") {
  RngStream s(23, {0});
  PartitionConfig bad_alpha;
  bad_alpha.scheme = PartitionScheme::Dirichlet;
  bad_alpha.alpha = 0.0;
  CHECK_THROWS_AS(partition_dataset(10, 2, bad_alpha, s), ConfigError);

  PartitionConfig bad_shards;
  bad_shards.scheme = PartitionScheme::SortedShards;
  bad_shards.shards_per_client = 0;
  std::vector<double> keys(10, 0.0);
  CHECK_THROWS_AS(partition_dataset(10, 2, bad_shards, s, &keys), ConfigError);

  CHECK_THROWS_AS(partition_dataset(3, 5, PartitionConfig{}, s), ConfigError);
}

TEST_CASE("shard oracle: deterministic full batch, unbiased minibatch") {
  RngStream s(25, {0});
  const SyntheticBlobs blobs = make_synthetic_blobs(20, 4, 2, 2.0, s);
  const KpcaProblem problem = KpcaProblem::from_samples(blobs.samples, 2);
  const Matrix x = project(problem.manifold(), sample_gaussian(s, 4, 2)).value();

  const ShardOracle full(problem, problem.all_indices(), 0);
  CHECK(full.eval(x, RngStream(1, {1})) == problem.value(x, problem.all_indices()));

  const ShardOracle mini(problem, problem.all_indices(), 4);
  const double v1 = mini.eval(x, RngStream(2, {7}));
  CHECK(v1 == mini.eval(x, RngStream(2, {7})));  // pure in the stream

  long double acc = 0.0L;
  const long reps = 20000;
  for (long i = 0; i < reps; ++i) {
    acc += mini.eval(x, RngStream(2, {8, static_cast<uint64_t>(i)}));
  }
  const double mc = static_cast<double>(acc / reps);
  const double exact = problem.value(x, problem.all_indices());
  CHECK(mc == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("every problem's gradient matches central differences at 20 random points") {
  RngStream s(29, {0});
  const SyntheticBlobs blobs = make_synthetic_blobs(10, 4, 2, 2.0, s);
  const KpcaProblem kpca = KpcaProblem::from_samples(blobs.samples, 2);
  const auto lowrank = LowRankRegressionProblem::synthetic(3, 3, 2, 8, 0.05, 0.2, s);

  std::vector<int> labels(4, 0);
  RngStream bs(31, {0});
  const LinearVictim victim = tiny_victim();
  Matrix bases4(4, 4);
  for (int j = 0; j < 4; ++j) {
    const Matrix b = sample_gaussian(bs, 1, 4);
    for (int k = 0; k < 4; ++k) bases4(j, k) = 2.0 * b(0, k);
    std::vector<double> row(4);
    for (int k = 0; k < 4; ++k) row[k] = bases4(j, k);
    labels[j] = victim.predict(row);
  }
  const SphereAttackProblem attack(victim, bases4, labels, 1.5, 1.0);

  auto check_fd = [&](const StochasticProblem& problem, uint64_t seed) {
    RngStream ps(seed, {1});
    const auto all = problem.all_indices();
    const int rows = problem.manifold().rows();
    const int cols = problem.manifold().cols();
    for (int point = 0; point < 20; ++point) {
      const Matrix x = sample_gaussian(ps, rows, cols);
      const Matrix grad = problem.euclid_grad(x, all);
      const Matrix dir = sample_unit_sphere(ps, rows, cols);
      const double h = 1e-6;
      Matrix plus = x, minus = x;
      plus += h * dir;
      minus -= h * dir;
      const double fd = (problem.value(plus, all) - problem.value(minus, all)) / (2.0 * h);
      const double expected = dot(grad, dir);
      const double scale = std::max(1.0, std::fabs(expected));
      CHECK(std::fabs(fd - expected) <= 1e-4 * scale);
    }
  };
  check_fd(kpca, 101);
  check_fd(lowrank, 102);
  check_fd(attack, 103);
}

TEST_CASE("global objective equals count-weighted client mean") {
  RngStream s(27, {0});
  const SyntheticBlobs blobs = make_synthetic_blobs(17, 4, 2, 2.0, s);
  const KpcaProblem problem = KpcaProblem::from_samples(blobs.samples, 2);
  PartitionConfig pc;
  pc.scheme = PartitionScheme::Dirichlet;
  pc.alpha = 0.6;
  const Partition p = partition_dataset(17, 3, pc, s);
  const Matrix x = project(problem.manifold(), sample_gaussian(s, 4, 2)).value();

  long double weighted = 0.0L;
  int total = 0;
  for (const auto& shard : p.assignment) {
    weighted += static_cast<long double>(shard.size()) * problem.value(x, shard);
    total += static_cast<int>(shard.size());
  }
  const double global = problem.value(x, problem.all_indices());
  CHECK(static_cast<double>(weighted / total) == doctest::Approx(global).epsilon(1e-12));
}
