#pragma once

#include <vector>

#include "ccplan/ellipsoid.hpp"

namespace ccplan {

/// Convex polyhedron {p : A p <= b} with unit-norm rows.
class Polyhedron {
 public:
  /// Normalises the rows of `a` (scaling b accordingly) and checks that the
  /// interior is nonempty via the Chebyshev centre.
  Polyhedron(const Mat& a, const Vec& b);

  /// Axis-aligned box [lo, hi] as 2d halfspaces (+x, -x, +y, -y, ...).
  static Polyhedron box(const Vec& lo, const Vec& hi);

  const Mat& a() const { return a_; }
  const Vec& b() const { return b_; }
  int dim() const { return static_cast<int>(a_.cols()); }
  int rows() const { return static_cast<int>(a_.rows()); }

  /// min_i (b_i - A_i p): the distance to the nearest face when inside.
  double margin(const Vec& p) const;
  bool contains(const Vec& p) const { return margin(p) >= 0.0; }

  const Vec& chebyshev_center() const { return center_; }
  double chebyshev_radius() const { return radius_; }

 private:
  Mat a_;
  Vec b_;
  Vec center_;
  double radius_ = 0.0;
};

/// residual_i = b_i - A_i c - ||Q^{1/2} A_i^T||; all entries >= 0 iff the
/// ellipsoid {c + x : x^T Q^{-1} x <= 1} lies inside the polyhedron.
/// The gradient with respect to c is -A.
Vec corridor_residuals(const Vec& center, const Ellipsoid& qa, const Polyhedron& poly);

/// Per reference point, the index of the containing polyhedron with the
/// largest margin (lowest index on ties). Throws kInfeasible when a point
/// lies in no polyhedron.
std::vector<int> assign_polyhedra(const std::vector<Vec>& reference,
                                  const std::vector<Polyhedron>& corridor);

}  // namespace ccplan
