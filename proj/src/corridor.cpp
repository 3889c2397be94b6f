#include "ccplan/corridor.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "ccplan/error.hpp"

namespace ccplan {

namespace {

// Box that closes unbounded polyhedra for the Chebyshev-centre LP.
constexpr double kLpBound = 1e6;

// max r s.t. A x + r <= b, solved by enumerating the vertices of the
// (d+1)-dimensional feasible set. Corridor polyhedra have few faces, so the
// combinatorial search is cheap and needs no LP solver.
void chebyshev(const Mat& a, const Vec& b, Vec& center, double& radius) {
  const int d = static_cast<int>(a.cols());
  const int n = static_cast<int>(a.rows());
  Mat ca(n + 2 * d, d + 1);
  Vec cb(n + 2 * d);
  ca.topLeftCorner(n, d) = a;
  ca.block(0, d, n, 1).setOnes();
  cb.head(n) = b;
  for (int k = 0; k < d; ++k) {
    ca.row(n + 2 * k).setZero();
    ca(n + 2 * k, k) = 1.0;
    ca(n + 2 * k, d) = 1.0;
    ca.row(n + 2 * k + 1).setZero();
    ca(n + 2 * k + 1, k) = -1.0;
    ca(n + 2 * k + 1, d) = 1.0;
    cb(n + 2 * k) = kLpBound;
    cb(n + 2 * k + 1) = kLpBound;
  }
  const int m = n + 2 * d;
  radius = -std::numeric_limits<double>::infinity();
  center = Vec::Zero(d);
  std::vector<int> pick(d + 1);
  Mat sys(d + 1, d + 1);
  Vec rhs(d + 1);
  std::function<void(int, int)> choose = [&](int start, int depth) {
    if (depth == d + 1) {
      for (int i = 0; i <= d; ++i) {
        sys.row(i) = ca.row(pick[i]);
        rhs(i) = cb(pick[i]);
      }
      Eigen::FullPivLU<Mat> lu(sys);
      if (lu.rank() < d + 1) return;
      const Vec v = lu.solve(rhs);
      if (v(d) <= radius) return;
      const double scale = 1e-9 * (1.0 + cb.cwiseAbs().maxCoeff());
      if (((ca * v - cb).array() > scale).any()) return;
      radius = v(d);
      center = v.head(d);
      return;
    }
    for (int i = start; i <= m - (d + 1 - depth); ++i) {
      pick[depth] = i;
      choose(i + 1, depth + 1);
    }
  };
  choose(0, 0);
}

}  // namespace

Polyhedron::Polyhedron(const Mat& a, const Vec& b) {
  if (a.rows() != b.size() || a.rows() == 0) {
    throw Error(ErrorKind::kDimensionMismatch, "polyhedron A and b sizes differ");
  }
  if (a.cols() != 2 && a.cols() != 3) {
    throw Error(ErrorKind::kDimensionMismatch, "polyhedron must be 2D or 3D");
  }
  if (!a.allFinite() || !b.allFinite()) throw Error(ErrorKind::kInvalidInput, "polyhedron not finite");
  a_ = a;
  b_ = b;
  for (int i = 0; i < a_.rows(); ++i) {
    const double nrm = a_.row(i).norm();
    if (!(nrm > 0.0)) throw Error(ErrorKind::kInvalidInput, "polyhedron row is zero");
    a_.row(i) /= nrm;
    b_(i) /= nrm;
  }
  chebyshev(a_, b_, center_, radius_);
  if (!(radius_ > 0.0)) throw Error(ErrorKind::kInfeasible, "polyhedron has an empty interior");
}

Polyhedron Polyhedron::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size()) throw Error(ErrorKind::kDimensionMismatch, "box corner sizes differ");
  const int d = static_cast<int>(lo.size());
  Mat a = Mat::Zero(2 * d, d);
  Vec b(2 * d);
  for (int k = 0; k < d; ++k) {
    a(2 * k, k) = 1.0;
    b(2 * k) = hi(k);
    a(2 * k + 1, k) = -1.0;
    b(2 * k + 1) = -lo(k);
  }
  return Polyhedron(a, b);
}

double Polyhedron::margin(const Vec& p) const {
  if (p.size() != dim()) throw Error(ErrorKind::kDimensionMismatch, "point/polyhedron dimension");
  return (b_ - a_ * p).minCoeff();
}

Vec corridor_residuals(const Vec& center, const Ellipsoid& qa, const Polyhedron& poly) {
  if (center.size() != poly.dim() || qa.dim() != poly.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "corridor residual dimensions");
  }
  const Mat& a = poly.a();
  const Mat aq = a * qa.shape();
  Vec r = poly.b() - a * center;
  for (int i = 0; i < a.rows(); ++i) r(i) -= std::sqrt(std::max(0.0, aq.row(i).dot(a.row(i))));
  return r;
}

std::vector<int> assign_polyhedra(const std::vector<Vec>& reference,
                                  const std::vector<Polyhedron>& corridor) {
  if (corridor.empty()) throw Error(ErrorKind::kInvalidInput, "empty corridor");
  std::vector<int> out;
  out.reserve(reference.size());
  for (const Vec& p : reference) {
    int best = -1;
    double best_margin = 0.0;
    for (size_t k = 0; k < corridor.size(); ++k) {
      const double m = corridor[k].margin(p);
      if (m >= 0.0 && (best < 0 || m > best_margin)) {
        best = static_cast<int>(k);
        best_margin = m;
      }
    }
    if (best < 0) throw Error(ErrorKind::kInfeasible, "reference point outside every corridor polyhedron");
    out.push_back(best);
  }
  return out;
}

}  // namespace ccplan
