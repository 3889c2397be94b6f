#include "ccplan/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "ccplan/error.hpp"

namespace ccplan {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "dimension mismatch";
    case ErrorKind::kNotPositiveDefinite: return "not positive definite";
    case ErrorKind::kDegenerateShape: return "degenerate shape";
    case ErrorKind::kZeroDirection: return "zero direction";
    case ErrorKind::kSingularCovariance: return "singular covariance";
    case ErrorKind::kOutOfRange: return "out of range";
    case ErrorKind::kNonConvergence: return "non-convergence";
    case ErrorKind::kInfeasible: return "infeasible";
    case ErrorKind::kInvalidInput: return "invalid input";
  }
  return "error";
}

SymEigen sym_eigen(const Mat& input) {
  if (input.rows() != input.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "sym_eigen needs a square matrix");
  }
  const Eigen::Index n = input.rows();
  Mat a = symmetrize(input);
  Mat v = Mat::Identity(n, n);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (off == 0.0 || off <= 1e-32 * a.squaredNorm()) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  SymEigen out{Vec(n), Mat(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<size_t>(k)];
    out.values(k) = a(src, src);
    Vec col = v.col(src);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(col(i)) > 1e-14) {
        if (col(i) < 0.0) col = -col;
        break;
      }
    }
    out.vectors.col(k) = col;
  }
  return out;
}

bool is_symmetric(const Mat& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

double min_eigenvalue(const Mat& a) {
  if (a.rows() == 0) return 0.0;
  return sym_eigen(a).values.minCoeff();
}

Mat sym_sqrt(const Mat& a) {
  const SymEigen e = sym_eigen(a);
  const Vec s = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * s.asDiagonal() * e.vectors.transpose();
}

Mat sym_inv_sqrt(const Mat& a) {
  const SymEigen e = sym_eigen(a);
  if (e.values.minCoeff() <= 0.0) {
    throw Error(ErrorKind::kNotPositiveDefinite, "inverse square root of a non-PD matrix");
  }
  const Vec s = e.values.cwiseSqrt().cwiseInverse();
  return e.vectors * s.asDiagonal() * e.vectors.transpose();
}

Eigen::Matrix3d rotation_rpy(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  Eigen::Matrix3d r;
  r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
       sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
       -sp, cp * sr, cp * cr;
  return r;
}

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double w = std::fmod(a, kTwoPi);
  if (w > std::numbers::pi) w -= kTwoPi;
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

}  // namespace ccplan
