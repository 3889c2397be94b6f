#include "ccplan/ellipsoid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ccplan/error.hpp"

namespace ccplan {

namespace {

constexpr double kSymmetryTol = 1e-12;
// Ratio of smallest to largest eigenvalue below which a shape is degenerate.
constexpr double kConditionFloor = 1e-14;

}  // namespace

Ellipsoid::Ellipsoid(const Mat& shape) {
  if (shape.rows() != shape.cols() || shape.rows() < 2 || shape.rows() > 3) {
    throw Error(ErrorKind::kDimensionMismatch, "ellipsoid shape must be 2x2 or 3x3");
  }
  if (!shape.allFinite()) {
    throw Error(ErrorKind::kInvalidInput, "ellipsoid shape has non-finite entries");
  }
  if (!is_symmetric(shape, kSymmetryTol)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "ellipsoid shape is not symmetric");
  }
  shape_ = symmetrize(shape);
  const SymEigen e = sym_eigen(shape_);
  const double lmax = e.values(0);
  const double lmin = e.values(e.values.size() - 1);
  if (!(lmin > 0.0)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "ellipsoid shape has a non-positive eigenvalue");
  }
  if (lmin < kConditionFloor * lmax) {
    throw Error(ErrorKind::kDegenerateShape, "ellipsoid shape is numerically singular");
  }
  inverse_ = symmetrize(e.vectors * e.values.cwiseInverse().asDiagonal() * e.vectors.transpose());
}

Ellipsoid Ellipsoid::from_semi_axes(const Vec& semi_axes) {
  return Ellipsoid(Mat(semi_axes.cwiseProduct(semi_axes).asDiagonal()));
}

Ellipsoid Ellipsoid::from_semi_axes(const Vec& semi_axes, const Mat& rotation) {
  if (rotation.rows() != semi_axes.size() || rotation.cols() != semi_axes.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "rotation does not match semi-axes");
  }
  const Mat d = semi_axes.cwiseProduct(semi_axes).asDiagonal();
  return Ellipsoid(symmetrize(rotation * d * rotation.transpose()));
}

double Ellipsoid::volume() const {
  const double unit_ball = dim() == 2 ? std::numbers::pi : 4.0 * std::numbers::pi / 3.0;
  return unit_ball * std::sqrt(shape_.determinant());
}

void validate(const GaussianState& g, bool strict) {
  if (g.cov.rows() != g.cov.cols() || g.cov.rows() != g.mean.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "gaussian mean/cov sizes differ");
  }
  if (!g.mean.allFinite() || !g.cov.allFinite()) {
    throw Error(ErrorKind::kInvalidInput, "gaussian has non-finite entries");
  }
  if (!is_symmetric(g.cov, 1e-10)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "covariance is not symmetric");
  }
  const Vec ev = sym_eigen(g.cov).values;
  const double lmin = ev(ev.size() - 1);
  const double scale = std::max(1.0, std::abs(ev(0)));
  if (strict) {
    if (!(lmin > kConditionFloor * scale)) {
      throw Error(ErrorKind::kSingularCovariance, "covariance is singular");
    }
  } else if (lmin < -1e-12 * scale) {
    throw Error(ErrorKind::kNotPositiveDefinite, "covariance has a negative eigenvalue");
  }
}

Ellipsoid minkowski_outer(const Ellipsoid& qx, const Ellipsoid& qo) {
  if (qx.dim() != qo.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "minkowski_outer operands differ in dimension");
  }
  const double alpha = qo.shape().trace() / qx.shape().trace();
  if (!(alpha >= 1e-12) || !std::isfinite(alpha) || 1.0 / alpha < 1e-12) {
    throw Error(ErrorKind::kDegenerateShape, "trace ratio out of range");
  }
  return Ellipsoid(symmetrize((1.0 + alpha) * qx.shape() + (1.0 + 1.0 / alpha) * qo.shape()));
}

Vec support_point(const Ellipsoid& q, const Vec& center, const Vec& direction) {
  if (direction.size() != q.dim() || center.size() != q.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "support_point operand sizes differ");
  }
  const Vec qa = q.shape() * direction;
  const double norm = std::sqrt(direction.dot(qa));
  if (!(norm > 0.0) || direction.norm() == 0.0) {
    throw Error(ErrorKind::kZeroDirection, "support direction is zero");
  }
  return center + qa / norm;
}

PrincipalAxes to_principal_axes(const GaussianState& rel, const Ellipsoid& qc) {
  if (rel.mean.size() != qc.dim() || rel.cov.rows() != qc.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "relative state and region differ in dimension");
  }
  validate(rel, /*strict=*/true);
  const SymEigen e = sym_eigen(rel.cov);
  const Mat& r = e.vectors;
  GaussianState out{r.transpose() * rel.mean, Mat(e.values.asDiagonal())};
  return {std::move(out), Ellipsoid(symmetrize(r.transpose() * qc.shape() * r)), r};
}

MinkowskiSumTest::MinkowskiSumTest(const Ellipsoid& qa, const Ellipsoid& qb) : dim_(qa.dim()) {
  if (qa.dim() != qb.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "Minkowski operands differ in dimension");
  }
  const Eigen::LLT<Mat> llt(qa.shape());
  const Mat l_inv = llt.matrixL().solve(Mat::Identity(dim_, dim_));
  const SymEigen e = sym_eigen(symmetrize(l_inv * qb.shape() * l_inv.transpose()));
  transform_ = e.vectors.transpose() * l_inv;
  beta_ = e.values;
}

bool MinkowskiSumTest::contains(const Vec& p) const {
  if (p.size() != dim_) throw Error(ErrorKind::kDimensionMismatch, "point size");
  return contains(p.data());
}

bool MinkowskiSumTest::contains(const double* p) const {
  double y2[3];
  for (int i = 0; i < dim_; ++i) {
    double s = 0.0;
    for (int j = 0; j < dim_; ++j) s += transform_(i, j) * p[j];
    y2[i] = s * s;
  }
  // G and G' at l; G is concave on [0, 1] with G(0) = G(1) = 0.
  auto eval = [&](double l, double& g, double& dg) {
    g = 0.0;
    dg = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double den = 1.0 + l * (beta_(i) - 1.0);
      g += y2[i] * l * (1.0 - l) / den;
      dg += y2[i] * (1.0 - 2.0 * l - l * l * (beta_(i) - 1.0)) / (den * den);
    }
  };
  double lo = 0.0, hi = 1.0;
  double g_lo = 0.0, g_hi = 0.0, d_lo = 0.0, d_hi = 0.0;
  eval(lo, g_lo, d_lo);
  eval(hi, g_hi, d_hi);
  if (d_lo <= 0.0) return true;  // p == 0

  for (int it = 0; it < 200; ++it) {
    // Tangent lines at lo and hi bound the concave G from above.
    const double denom = d_lo - d_hi;
    double cut = (g_hi - g_lo + d_lo * lo - d_hi * hi) / denom;
    const double upper = g_lo + d_lo * (cut - lo);
    if (upper <= 1.0) return true;
    const double width = hi - lo;
    if (!(cut > lo + 0.05 * width && cut < hi - 0.05 * width)) cut = 0.5 * (lo + hi);
    double g = 0.0, dg = 0.0;
    eval(cut, g, dg);
    if (g > 1.0) return false;
    if (dg > 0.0) {
      lo = cut;
      g_lo = g;
      d_lo = dg;
    } else {
      hi = cut;
      g_hi = g;
      d_hi = dg;
    }
    if (hi - lo < 1e-15) return true;
  }
  return true;
}

bool ellipsoids_overlap(const Vec& center_a, const Ellipsoid& qa, const Vec& center_b,
                        const Ellipsoid& qb) {
  const Vec d = center_b - center_a;
  return MinkowskiSumTest(qa, qb).contains(d);
}

}  // namespace ccplan
