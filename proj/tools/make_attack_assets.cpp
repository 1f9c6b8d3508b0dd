// One-off generator for the frozen attack-surrogate assets: trains a tiny
// linear softmax victim on synthetic blobs, selects 25 correctly-classified
// base inputs from one class, and writes both as CSV assets. The printed
// FNV-1a hashes and suggested epsilon go into the asset config; the main
// code path only ever loads the frozen files.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "zofed/attack.hpp"
#include "zofed/csv.hpp"
#include "zofed/matrix.hpp"
#include "zofed/rng.hpp"

using namespace zofed;

namespace {

constexpr int kDim = 16;
constexpr int kClasses = 3;
constexpr int kPerClass = 120;
constexpr int kBases = 25;
constexpr uint64_t kSeed = 20240915;

struct Dataset {
  Matrix x;  // n x dim
  std::vector<int> y;
};

Dataset make_blobs(RngStream& stream) {
  Dataset d;
  d.x = Matrix(kClasses * kPerClass, kDim);
  d.y.resize(kClasses * kPerClass);
  std::vector<Matrix> means;
  for (int c = 0; c < kClasses; ++c) {
    Matrix mu = sample_unit_sphere(stream, kDim, 1);
    mu *= 2.2;
    means.push_back(mu);
  }
  for (int n = 0; n < d.x.rows(); ++n) {
    const int c = n % kClasses;
    d.y[n] = c;
    for (int k = 0; k < kDim; ++k) d.x(n, k) = means[c](k, 0) + stream.next_gaussian();
  }
  return d;
}

// Full-batch softmax regression with weight decay; small weights keep the
// class margins modest so a unit-sphere perturbation can cross them.
void train_softmax(const Dataset& d, Matrix& w, std::vector<double>& b) {
  w = Matrix(kClasses, kDim);
  b.assign(kClasses, 0.0);
  const double lr = 0.5;
  const double decay = 1e-3;
  const int n = d.x.rows();
  for (int it = 0; it < 400; ++it) {
    Matrix gw(kClasses, kDim);
    std::vector<double> gb(kClasses, 0.0);
    for (int s = 0; s < n; ++s) {
      std::vector<double> z(kClasses);
      double zmax = -1e300;
      for (int c = 0; c < kClasses; ++c) {
        double acc = b[c];
        for (int k = 0; k < kDim; ++k) acc += w(c, k) * d.x(s, k);
        z[c] = acc;
        zmax = std::max(zmax, acc);
      }
      double denom = 0.0;
      for (int c = 0; c < kClasses; ++c) denom += std::exp(z[c] - zmax);
      for (int c = 0; c < kClasses; ++c) {
        const double p = std::exp(z[c] - zmax) / denom;
        const double err = p - (c == d.y[s] ? 1.0 : 0.0);
        gb[c] += err;
        for (int k = 0; k < kDim; ++k) gw(c, k) += err * d.x(s, k);
      }
    }
    for (int c = 0; c < kClasses; ++c) {
      b[c] -= lr * gb[c] / n;
      for (int k = 0; k < kDim; ++k) {
        w(c, k) -= lr * (gw(c, k) / n + decay * w(c, k));
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out_dir = argc > 1 ? argv[1] : "assets";
  std::filesystem::create_directories(out_dir);

  RngStream stream(kSeed);
  const Dataset train = make_blobs(stream);
  Matrix w;
  std::vector<double> b;
  train_softmax(train, w, b);
  const LinearVictim victim = LinearVictim::from_weights(w, b);

  int correct = 0;
  std::vector<double> row(kDim);
  for (int s = 0; s < train.x.rows(); ++s) {
    for (int k = 0; k < kDim; ++k) row[k] = train.x(s, k);
    if (victim.predict(row) == train.y[s]) ++correct;
  }
  std::printf("victim train accuracy: %.3f\n", double(correct) / train.x.rows());

  // Fresh class-0 draws, kept only when correctly classified.
  Dataset pool = make_blobs(stream);
  std::vector<int> picked;
  double max_margin = 0.0;
  for (int s = 0; s < pool.x.rows() && static_cast<int>(picked.size()) < kBases; ++s) {
    if (pool.y[s] != 0) continue;
    for (int k = 0; k < kDim; ++k) row[k] = pool.x(s, k);
    const std::vector<double> z = victim.logits(row);
    double other = -1e300;
    for (int c = 1; c < kClasses; ++c) other = std::max(other, z[c]);
    if (z[0] - other <= 0.0) continue;
    picked.push_back(s);
    max_margin = std::max(max_margin, z[0] - other);
  }
  if (static_cast<int>(picked.size()) < kBases) {
    std::fprintf(stderr, "could not collect %d correctly-classified bases\n", kBases);
    return 1;
  }

  // Victim CSV: class,bias,w0..w{d-1} with a header row.
  {
    std::ostringstream out;
    out << "class,bias";
    for (int k = 0; k < kDim; ++k) out << ",w" << k;
    out << '\n';
    for (int c = 0; c < kClasses; ++c) {
      out << c << ',' << format_double(b[c]);
      for (int k = 0; k < kDim; ++k) out << ',' << format_double(w(c, k));
      out << '\n';
    }
    write_file_atomic(out_dir + "/victim_weights.csv", out.str());
  }

  // Bases CSV: label,f0..f{d-1}.
  {
    std::ostringstream out;
    out << "label";
    for (int k = 0; k < kDim; ++k) out << ",f" << k;
    out << '\n';
    for (int s : picked) {
      out << pool.y[s];
      for (int k = 0; k < kDim; ++k) out << ',' << format_double(pool.x(s, k));
      out << '\n';
    }
    write_file_atomic(out_dir + "/attack_bases.csv", out.str());
  }

  // The smallest epsilon that could flip the worst base along an ideal
  // direction, padded; starting point for the recorded tuning.
  double min_row_gap = 1e300;
  for (int c = 1; c < kClasses; ++c) {
    double gap = 0.0;
    for (int k = 0; k < kDim; ++k) {
      const double d2 = w(0, k) - w(c, k);
      gap += d2 * d2;
    }
    min_row_gap = std::min(min_row_gap, std::sqrt(gap));
  }
  std::printf("max base margin: %s, min weight-row gap: %s, suggested epsilon >= %s\n",
              format_double(max_margin).c_str(), format_double(min_row_gap).c_str(),
              format_double(1.3 * max_margin / min_row_gap).c_str());
  std::printf("victim_weights fnv1a: 0x%016llx\n",
              static_cast<unsigned long long>(fnv1a_file(out_dir + "/victim_weights.csv")));
  std::printf("attack_bases fnv1a: 0x%016llx\n",
              static_cast<unsigned long long>(fnv1a_file(out_dir + "/attack_bases.csv")));
  return 0;
}
