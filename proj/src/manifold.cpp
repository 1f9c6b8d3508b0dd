#include "zofed/manifold.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>

namespace zofed {
namespace {

// Relative floor below which a norm or singular value counts as zero for
// projection uniqueness.
constexpr double kDegenerate = 1e-12;

double column_norm(const Matrix& a, int j) {
  long double acc = 0.0L;
  for (int i = 0; i < a.rows(); ++i) acc += static_cast<long double>(a(i, j)) * a(i, j);
  return static_cast<double>(std::sqrt(acc));
}

// sym(A) = (A + Aᵀ)/2 in place.
Matrix symmetrize(Matrix a) {
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = i + 1; j < a.cols(); ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }
  }
  return a;
}

// First k columns of m.
Matrix head_cols(const Matrix& m, int k) {
  Matrix out(m.rows(), k);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < k; ++j) out(i, j) = m(i, j);
  return out;
}

}  // namespace

ManifoldKind::ManifoldKind(ManifoldFamily f, int p, int r, int rank, double gamma)
    : family_(f), p_(p), r_(r), rank_(rank), gamma_(gamma) {
  if (p < 1 || r < 1) throw DimensionMismatch("ManifoldKind: dimensions must be positive");
}

ManifoldKind ManifoldKind::sphere(int p, int r) {
  return ManifoldKind(ManifoldFamily::Sphere, p, r, 0, 0.5);
}

ManifoldKind ManifoldKind::stiefel(int p, int r) {
  if (p < r) throw DimensionMismatch("stiefel: requires p >= r");
  return ManifoldKind(ManifoldFamily::Stiefel, p, r, 0, 0.5);
}

ManifoldKind ManifoldKind::oblique(int p, int r) {
  return ManifoldKind(ManifoldFamily::Oblique, p, r, 0, 0.5);
}

ManifoldKind ManifoldKind::fixed_rank(int p, int r, int rank, double gamma) {
  if (rank < 1 || rank > std::min(p, r)) throw DimensionMismatch("fixed_rank: invalid rank");
  if (gamma <= 0.0) throw ConfigError("fixed_rank: gamma must be positive");
  static std::once_flag warned;
  std::call_once(warned, [] {
    std::fprintf(stderr,
                 "warning: fixed-rank manifold is non-compact; the supplied tube radius gamma is "
                 "a user estimate, not a guarantee\n");
  });
  return ManifoldKind(ManifoldFamily::FixedRank, p, r, rank, gamma);
}

std::string ManifoldKind::name() const {
  switch (family_) {
    case ManifoldFamily::Sphere:
      return "sphere(" + std::to_string(p_) + "x" + std::to_string(r_) + ")";
    case ManifoldFamily::Stiefel:
      return "stiefel(" + std::to_string(p_) + "," + std::to_string(r_) + ")";
    case ManifoldFamily::Oblique:
      return "oblique(" + std::to_string(p_) + "," + std::to_string(r_) + ")";
    case ManifoldFamily::FixedRank:
      return "fixed_rank(" + std::to_string(p_) + "," + std::to_string(r_) + "," +
             std::to_string(rank_) + ")";
  }
  return "?";
}

ManifoldPoint::ManifoldPoint(ManifoldKind manifold, Matrix value)
    : manifold_(std::move(manifold)), value_(std::move(value)) {
  if (value_.rows() != manifold_.rows() || value_.cols() != manifold_.cols()) {
    throw DimensionMismatch("ManifoldPoint: value shape does not match manifold");
  }
  const double res = check_membership(manifold_, value_);
  if (res > tol::kMembership) {
    throw MembershipViolation("ManifoldPoint: membership residual " + std::to_string(res) +
                              " on " + manifold_.name());
  }
}

ManifoldPoint::ManifoldPoint(ManifoldKind m, Matrix v, TrustedTag)
    : manifold_(std::move(m)), value_(std::move(v)) {}

ManifoldPoint ManifoldPoint::trusted(ManifoldKind manifold, Matrix value) {
  return ManifoldPoint(std::move(manifold), std::move(value), TrustedTag{});
}

ManifoldPoint project(const ManifoldKind& m, const Matrix& a) {
  if (a.rows() != m.rows() || a.cols() != m.cols()) {
    throw DimensionMismatch("project: input shape does not match manifold");
  }
  a.require_finite("project input");

  switch (m.family()) {
    case ManifoldFamily::Sphere: {
      const double n = a.norm();
      if (n <= kDegenerate) throw DegenerateProjection("project(sphere): zero-norm input");
      return ManifoldPoint::trusted(m, (1.0 / n) * a);
    }
    case ManifoldFamily::Oblique: {
      Matrix out = a;
      for (int j = 0; j < a.cols(); ++j) {
        const double n = column_norm(a, j);
        if (n <= kDegenerate) {
          throw DegenerateProjection("project(oblique): zero-norm column " + std::to_string(j));
        }
        for (int i = 0; i < a.rows(); ++i) out(i, j) /= n;
      }
      return ManifoldPoint::trusted(m, std::move(out));
    }
    case ManifoldFamily::Stiefel: {
      // Polar factor u vᵀ of the thin SVD; stable near the tube boundary.
      double sigma_ratio = 0.0;
      Matrix polar = thin_polar_factor(a, sigma_ratio);
      if (sigma_ratio <= kDegenerate) {
        throw DegenerateProjection("project(stiefel): rank-deficient input");
      }
      return ManifoldPoint::trusted(m, std::move(polar));
    }
    case ManifoldFamily::FixedRank: {
      const ThinSvd svd = thin_svd(a);
      const int R = m.rank();
      const double s1 = svd.s.front();
      if (s1 <= 0.0 || svd.s[R - 1] <= kDegenerate * s1) {
        throw DegenerateProjection("project(fixed_rank): fewer than R nonzero singular values");
      }
      if (R < static_cast<int>(svd.s.size()) && svd.s[R - 1] - svd.s[R] <= 1e-12) {
        // The nearest rank-R matrix is genuinely non-unique at a tie.
        throw DegenerateProjection("project(fixed_rank): tie at the R-th singular value");
      }
      Matrix us = head_cols(svd.u, R);
      for (int j = 0; j < R; ++j)
        for (int i = 0; i < us.rows(); ++i) us(i, j) *= svd.s[j];
      return ManifoldPoint::trusted(m, matmul_nt(us, head_cols(svd.v, R)));
    }
  }
  throw Error("project: unreachable");
}

Matrix tangent_project(const ManifoldPoint& x, const Matrix& v) {
  const ManifoldKind& m = x.manifold();
  if (v.rows() != m.rows() || v.cols() != m.cols()) {
    throw DimensionMismatch("tangent_project: direction shape mismatch");
  }
  const double res = check_membership(m, x.value());
  if (res > tol::kMembership) {
    throw MembershipViolation("tangent_project: point off manifold, residual " +
                              std::to_string(res));
  }

  switch (m.family()) {
    case ManifoldFamily::Sphere: {
      Matrix out = v;
      const double c = dot(v, x.value());
      Matrix scaled = x.value();
      scaled *= c;
      out -= scaled;
      return out;
    }
    case ManifoldFamily::Oblique: {
      Matrix out = v;
      for (int j = 0; j < v.cols(); ++j) {
        long double c = 0.0L;
        for (int i = 0; i < v.rows(); ++i)
          c += static_cast<long double>(v(i, j)) * x.value()(i, j);
        for (int i = 0; i < v.rows(); ++i)
          out(i, j) -= static_cast<double>(c) * x.value()(i, j);
      }
      return out;
    }
    case ManifoldFamily::Stiefel: {
      // v - x sym(xᵀ v)
      const Matrix xtv = matmul_tn(x.value(), v);
      return v - matmul(x.value(), symmetrize(xtv));
    }
    case ManifoldFamily::FixedRank: {
      // P(v) = U Uᵀ v + v V Vᵀ - U Uᵀ v V Vᵀ with U, V the rank-R factors of x.
      const ThinSvd svd = thin_svd(x.value());
      const Matrix u = head_cols(svd.u, m.rank());
      const Matrix vv = head_cols(svd.v, m.rank());
      const Matrix ut_v = matmul_tn(u, v);            // R x r
      const Matrix uu_v = matmul(u, ut_v);            // p x r
      const Matrix v_vvt = matmul_nt(matmul(v, vv), vv);
      const Matrix uu_v_vvt = matmul_nt(matmul(uu_v, vv), vv);
      return uu_v + v_vvt - uu_v_vvt;
    }
  }
  throw Error("tangent_project: unreachable");
}

Matrix riemannian_gradient(const ManifoldPoint& x, const Matrix& euclid_grad) {
  return tangent_project(x, euclid_grad);
}

ManifoldPoint retract_polar(const ManifoldPoint& x, const Matrix& s) {
  const ManifoldKind& m = x.manifold();
  if (s.rows() != m.rows() || s.cols() != m.cols()) {
    throw DimensionMismatch("retract_polar: direction shape mismatch");
  }
  const double snorm = s.norm();
  if (snorm == 0.0) return x;  // retraction axiom: Retr_x(0) = x exactly

  const Matrix residual = tangent_project(x, s) - s;
  if (residual.norm() > tol::kTangency * std::max(1.0, snorm)) {
    throw NonTangentDirection("retract_polar: direction not tangent, residual " +
                              std::to_string(residual.norm()));
  }

  if (m.family() == ManifoldFamily::Stiefel) {
    // (x + s)(I + sᵀ s)^{-1/2}
    Matrix b = matmul_tn(s, s);
    for (int i = 0; i < b.rows(); ++i) b(i, i) += 1.0;
    return ManifoldPoint::trusted(m, matmul(x.value() + s, spd_inverse_sqrt(b)));
  }
  return project(m, x.value() + s);
}

double check_membership(const ManifoldKind& m, const Matrix& a) {
  if (a.rows() != m.rows() || a.cols() != m.cols()) {
    throw DimensionMismatch("check_membership: shape mismatch");
  }
  switch (m.family()) {
    case ManifoldFamily::Sphere:
      return std::fabs(a.norm() - 1.0);
    case ManifoldFamily::Stiefel: {
      Matrix g = matmul_tn(a, a);
      for (int i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
      return g.norm();
    }
    case ManifoldFamily::Oblique: {
      double worst = 0.0;
      for (int j = 0; j < a.cols(); ++j) worst = std::max(worst, std::fabs(column_norm(a, j) - 1.0));
      return worst;
    }
    case ManifoldFamily::FixedRank: {
      const ThinSvd svd = thin_svd(a);
      const double s1 = svd.s.front();
      if (s1 == 0.0) return 1.0;  // zero matrix: as far from rank R >= 1 as the ratio can get
      const int R = m.rank();
      return R < static_cast<int>(svd.s.size()) ? svd.s[R] / s1 : 0.0;
    }
  }
  throw Error("check_membership: unreachable");
}

double dist_to_manifold(const ManifoldKind& m, const Matrix& a) {
  return (a - project(m, a).value()).norm();
}

}  // namespace zofed
