#pragma once

#include <Eigen/Dense>

namespace ccplan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted in
/// descending order; each eigenvector column has its first nonzero component
/// made positive so the result is deterministic.
struct SymEigen {
  Vec values;
  Mat vectors;
};

/// Cyclic Jacobi rotations. Intended for the small (d <= 3) shape and
/// covariance matrices but correct for any size.
SymEigen sym_eigen(const Mat& a);

bool is_symmetric(const Mat& a, double rel_tol = 1e-12);
Mat symmetrize(const Mat& a);

/// Smallest eigenvalue; throws if `a` is not square.
double min_eigenvalue(const Mat& a);

Mat sym_sqrt(const Mat& a);
Mat sym_inv_sqrt(const Mat& a);

/// Rotation matrix R = Rz(yaw) * Ry(pitch) * Rx(roll).
Eigen::Matrix3d rotation_rpy(double roll, double pitch, double yaw);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

}  // namespace ccplan
