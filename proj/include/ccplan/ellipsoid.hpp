#pragma once

#include "ccplan/linalg.hpp"

namespace ccplan {

/// Origin-centred ellipsoid {x : x^T Q^{-1} x <= 1}. The shape matrix Q is
/// symmetric positive definite (semi-axes are the square roots of its
/// eigenvalues); d is 2 or 3. Construction validates and caches Q^{-1}.
class Ellipsoid {
 public:
  explicit Ellipsoid(const Mat& shape);

  /// Shape from semi-axis lengths and an optional rotation (columns are the
  /// world-frame axis directions).
  static Ellipsoid from_semi_axes(const Vec& semi_axes);
  static Ellipsoid from_semi_axes(const Vec& semi_axes, const Mat& rotation);

  const Mat& shape() const { return shape_; }
  const Mat& inverse() const { return inverse_; }
  int dim() const { return static_cast<int>(shape_.rows()); }

  /// p^T Q^{-1} p.
  double mahalanobis_sq(const Vec& p) const { return p.dot(inverse_ * p); }
  bool contains(const Vec& p) const { return mahalanobis_sq(p) <= 1.0; }

  Ellipsoid scaled(double factor) const { return Ellipsoid(factor * shape_); }
  double volume() const;

 private:
  Mat shape_;
  Mat inverse_;
};

/// Normal distribution N(mean, cov); cov symmetric PSD.
struct GaussianState {
  Vec mean;
  Mat cov;
};

/// Throws kDimensionMismatch / kNotPositiveDefinite when the invariants fail.
/// `strict` additionally requires cov to be positive definite.
void validate(const GaussianState& g, bool strict = false);

/// Outer ellipsoid of the Minkowski sum qx (+) qo:
///   (1 + a) Qx + (1 + 1/a) Qo,  a = tr(Qo) / tr(Qx).
/// Note: the minimal-trace bound uses sqrt(tr(Qo)/tr(Qx)); any a > 0 yields
/// a valid outer bound, and this ratio is the one the planner is tuned with.
Ellipsoid minkowski_outer(const Ellipsoid& qx, const Ellipsoid& qo);

/// Point of the ellipsoid at `center` that maximises a^T x:
/// center + Q a / ||Q^{1/2} a||.
Vec support_point(const Ellipsoid& q, const Vec& center, const Vec& direction);

struct PrincipalAxes {
  GaussianState rel;  ///< mean R^T p, diagonal covariance (descending)
  Ellipsoid region;   ///< R^T Qc R
  Mat rotation;       ///< R, columns are eigenvectors of the input covariance
};

/// Rotates the relative-position distribution onto the eigenbasis of its
/// covariance so the coordinates become independent.
PrincipalAxes to_principal_axes(const GaussianState& rel, const Ellipsoid& qc);

/// Exact membership test for the true Minkowski sum of two origin-centred
/// ellipsoids. Uses simultaneous diagonalisation and the concave overlap
/// function G(l) = l (1 - l) p^T [(1 - l) Qa + l Qb]^{-1} p; p is in the sum
/// iff max_l G(l) <= 1.
class MinkowskiSumTest {
 public:
  MinkowskiSumTest(const Ellipsoid& qa, const Ellipsoid& qb);

  bool contains(const Vec& p) const;
  /// Raw-pointer entry for hot sampling loops; p has dim() entries.
  bool contains(const double* p) const;
  int dim() const { return dim_; }

 private:
  int dim_;
  Mat transform_;  // y = transform_ * p
  Vec beta_;
};

/// True when the two ellipsoids placed at their centers intersect.
bool ellipsoids_overlap(const Vec& center_a, const Ellipsoid& qa, const Vec& center_b,
                        const Ellipsoid& qb);

}  // namespace ccplan
