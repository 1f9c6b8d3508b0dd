#pragma once

#include <string>

#include "zofed/linalg.hpp"
#include "zofed/matrix.hpp"

namespace zofed {

// Project-wide tolerance ladder. Tests reference these constants instead of
// re-stating magic numbers.
namespace tol {
inline constexpr double kMembership = 1e-10;
inline constexpr double kTangency = 1e-8;
inline constexpr double kSvdReconstruction = 1e-12;
}  // namespace tol

enum class ManifoldFamily { Sphere, Stiefel, Oblique, FixedRank };

// Description of the constraint set together with its proximal-smoothness
// tube radius gamma (the manifold is 2*gamma-proximally smooth; nearest-point
// projection is unique inside the 2*gamma tube and non-expansive up to a
// factor 2 inside the gamma tube).
class ManifoldKind {
 public:
  // Unit Frobenius sphere of R^{p x r}.
  static ManifoldKind sphere(int p, int r);
  // Orthonormal p x r frames, p >= r. 1-proximally smooth, so gamma = 0.5.
  static ManifoldKind stiefel(int p, int r);
  // Unit-norm columns.
  static ManifoldKind oblique(int p, int r);
  // p x r matrices of rank exactly `rank`. Non-compact, so no universal tube
  // radius exists; gamma is user-supplied and the first construction emits a
  // one-time warning on stderr.
  static ManifoldKind fixed_rank(int p, int r, int rank, double gamma);

  ManifoldFamily family() const { return family_; }
  int rows() const { return p_; }
  int cols() const { return r_; }
  int rank() const { return rank_; }
  int ambient_dim() const { return p_ * r_; }
  double gamma() const { return gamma_; }

  std::string name() const;

  friend bool operator==(const ManifoldKind&, const ManifoldKind&) = default;

 private:
  ManifoldKind(ManifoldFamily f, int p, int r, int rank, double gamma);

  ManifoldFamily family_;
  int p_;
  int r_;
  int rank_;  // meaningful for FixedRank only
  double gamma_;
};

// A point together with the manifold it lives on. The public constructor
// validates membership; `trusted` skips the check for values produced by
// project() itself.
class ManifoldPoint {
 public:
  ManifoldPoint(ManifoldKind manifold, Matrix value);  // throws MembershipViolation
  static ManifoldPoint trusted(ManifoldKind manifold, Matrix value);

  const ManifoldKind& manifold() const { return manifold_; }
  const Matrix& value() const { return value_; }

 private:
  struct TrustedTag {};
  ManifoldPoint(ManifoldKind m, Matrix v, TrustedTag);

  ManifoldKind manifold_;
  Matrix value_;
};

// Nearest-point projection onto the manifold (argmin over the manifold of
// 0.5*||a - x||^2). Throws DegenerateProjection when the minimizer is not
// unique at the input: zero norms, rank-deficient Stiefel input, or a tie at
// the truncation rank for FixedRank.
ManifoldPoint project(const ManifoldKind& m, const Matrix& a);

// Orthogonal projection of v onto the tangent space at x.
Matrix tangent_project(const ManifoldPoint& x, const Matrix& v);

// Riemannian gradient = tangent projection of the Euclidean gradient.
Matrix riemannian_gradient(const ManifoldPoint& x, const Matrix& euclid_grad);

// Retraction along a tangent direction s: polar decomposition for Stiefel,
// metric projection of x + s otherwise. Requires s tangent at x up to
// tol::kTangency (relative to max(1, ||s||)).
ManifoldPoint retract_polar(const ManifoldPoint& x, const Matrix& s);

// Membership residual: |‖a‖-1| (Sphere), ‖aᵀa - I‖ (Stiefel), max column-norm
// deviation (Oblique), σ_{R+1}/σ_1 (FixedRank).
double check_membership(const ManifoldKind& m, const Matrix& a);

// ||a - project(m, a)||.
double dist_to_manifold(const ManifoldKind& m, const Matrix& a);

}  // namespace zofed
