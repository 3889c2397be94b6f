#include "ccplan/gauss_hermite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "ccplan/error.hpp"

namespace ccplan {

namespace {

// Normalised Hermite functions psi_k(x) = H_k(x) e^{-x^2/2} / sqrt(2^k k! sqrt(pi));
// returns psi_n and psi_{n-1}. Stays in range for |x| up to ~37.
void hermite_functions(int n, double x, double& psi_n, double& psi_nm1) {
  double p_prev = 0.0;
  double p = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  for (int k = 1; k <= n; ++k) {
    const double next = std::sqrt(2.0 / k) * x * p - std::sqrt((k - 1.0) / k) * p_prev;
    p_prev = p;
    p = next;
  }
  psi_n = p;
  psi_nm1 = p_prev;
}

struct Grid {
  int dim = 0;
  double mu[3] = {0, 0, 0};
  double scale[3] = {0, 0, 0};  // sqrt(2) sigma_i
  double m[3][3] = {};          // Q_r^{-1}
  double half_extent[3] = {0, 0, 0};
  const HermiteRule* rule = nullptr;

  double quad(const double* r) const {
    double s = 0.0;
    for (int i = 0; i < dim; ++i) {
      s += m[i][i] * r[i] * r[i];
      for (int j = i + 1; j < dim; ++j) s += 2.0 * m[i][j] * r[i] * r[j];
    }
    return s;
  }
  double coord(int axis, int j) const { return scale[axis] * rule->nodes[j] + mu[axis]; }
};

Grid make_grid(const GaussianState& rel, const Ellipsoid& qc, int n) {
  const PrincipalAxes pa = to_principal_axes(rel, qc);
  Grid g;
  g.dim = qc.dim();
  g.rule = &hermite_rule(n);
  const Mat& inv = pa.region.inverse();
  for (int i = 0; i < g.dim; ++i) {
    g.mu[i] = pa.rel.mean(i);
    g.scale[i] = std::numbers::sqrt2 * std::sqrt(pa.rel.cov(i, i));
    g.half_extent[i] = std::sqrt(pa.region.shape()(i, i));
    for (int j = 0; j < g.dim; ++j) g.m[i][j] = inv(i, j);
  }
  return g;
}

// Index range [first, last) of nodes whose coordinate can fall in (lo, hi).
// The interval is padded so rounding never drops a point inside the region.
std::pair<int, int> node_range(const Grid& g, int axis, double lo, double hi) {
  const double pad = 1e-9 * (1.0 + std::abs(lo) + std::abs(hi));
  const double zlo = (lo - pad - g.mu[axis]) / g.scale[axis];
  const double zhi = (hi + pad - g.mu[axis]) / g.scale[axis];
  const auto& z = g.rule->nodes;
  const int first = static_cast<int>(std::lower_bound(z.begin(), z.end(), zlo) - z.begin());
  const int last = static_cast<int>(std::upper_bound(z.begin(), z.end(), zhi) - z.begin());
  return {first, std::max(first, last)};
}

// Solves a x^2 + 2 b x + c < 1 for x; returns false when empty.
bool quadratic_interval(double a, double b, double c, double& lo, double& hi) {
  const double disc = b * b - a * (c - 1.0);
  if (disc < 0.0) return false;
  const double root = std::sqrt(disc);
  lo = (-b - root) / a;
  hi = (-b + root) / a;
  return true;
}

}  // namespace

HermiteRule compute_hermite_rule(int n) {
  if (n < 1 || n > kMaxHermiteNodes) {
    throw Error(ErrorKind::kOutOfRange, "Hermite rule size must be in [1, 512]");
  }
  HermiteRule rule;
  rule.n = n;
  rule.nodes.resize(static_cast<size_t>(n));
  rule.weights.resize(static_cast<size_t>(n));
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = std::sqrt(std::numbers::pi);
    return rule;
  }

  // Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix with
  // zero diagonal and off-diagonal sqrt(k / 2).
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(n - 1);
  for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd guess = solver.eigenvalues();

  for (int j = 0; j < n; ++j) {
    double x = guess(j);
    for (int it = 0; it < 8; ++it) {
      double pn = 0.0, pnm1 = 0.0;
      hermite_functions(n, x, pn, pnm1);
      const double dpn = std::sqrt(2.0 * n) * pnm1 - x * pn;
      const double step = pn / dpn;
      x -= step;
      if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
    }
    double pn = 0.0, pnm1 = 0.0;
    hermite_functions(n, x, pn, pnm1);
    rule.nodes[static_cast<size_t>(j)] = x;
    // w = exp(-x^2) / (n psi_{n-1}(x)^2), evaluated in log space.
    rule.weights[static_cast<size_t>(j)] =
        std::exp(-x * x - std::log(static_cast<double>(n)) - 2.0 * std::log(std::abs(pnm1)));
  }
  // Enforce exact symmetry about zero.
  for (int j = 0; j < n / 2; ++j) {
    const size_t a = static_cast<size_t>(j);
    const size_t b = static_cast<size_t>(n - 1 - j);
    const double x = 0.5 * (rule.nodes[b] - rule.nodes[a]);
    const double w = 0.5 * (rule.weights[a] + rule.weights[b]);
    rule.nodes[a] = -x;
    rule.nodes[b] = x;
    rule.weights[a] = rule.weights[b] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<size_t>(n / 2)] = 0.0;
  return rule;
}

const HermiteRule& hermite_rule(int n) {
  if (n < 1 || n > kMaxHermiteNodes) {
    throw Error(ErrorKind::kOutOfRange, "Hermite rule size must be in [1, 512]");
  }
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const HermiteRule>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<const HermiteRule>(compute_hermite_rule(n));
  return *slot;
}

GhEvaluation collision_prob_gh_detailed(const GaussianState& rel, const Ellipsoid& qc, int n) {
  const Grid g = make_grid(rel, qc, n);
  const auto& w = g.rule->weights;
  GhEvaluation out;
  out.grid_points = 1;
  for (int i = 0; i < g.dim; ++i) out.grid_points *= n;

  double acc = 0.0;
  double r[3] = {0, 0, 0};
  if (g.dim == 2) {
    const auto [f0, l0] = node_range(g, 0, -g.half_extent[0], g.half_extent[0]);
    for (int j0 = f0; j0 < l0; ++j0) {
      r[0] = g.coord(0, j0);
      double lo, hi;
      if (!quadratic_interval(g.m[1][1], g.m[0][1] * r[0], g.m[0][0] * r[0] * r[0], lo, hi)) continue;
      const auto [f1, l1] = node_range(g, 1, lo, hi);
      for (int j1 = f1; j1 < l1; ++j1) {
        r[1] = g.coord(1, j1);
        ++out.indicator_calls;
        if (g.quad(r) < 1.0) acc += w[j0] * w[j1];
      }
    }
    out.value = std::clamp(acc / std::numbers::pi, 0.0, 1.0);
    return out;
  }

  // 3D: eliminate r2 to get the (r0, r1) section via the Schur complement.
  const double s00 = g.m[0][0] - g.m[0][2] * g.m[0][2] / g.m[2][2];
  const double s01 = g.m[0][1] - g.m[0][2] * g.m[1][2] / g.m[2][2];
  const double s11 = g.m[1][1] - g.m[1][2] * g.m[1][2] / g.m[2][2];
  const auto [f0, l0] = node_range(g, 0, -g.half_extent[0], g.half_extent[0]);
  for (int j0 = f0; j0 < l0; ++j0) {
    r[0] = g.coord(0, j0);
    double lo1, hi1;
    if (!quadratic_interval(s11, s01 * r[0], s00 * r[0] * r[0], lo1, hi1)) continue;
    const auto [f1, l1] = node_range(g, 1, lo1, hi1);
    for (int j1 = f1; j1 < l1; ++j1) {
      r[1] = g.coord(1, j1);
      const double b = g.m[0][2] * r[0] + g.m[1][2] * r[1];
      const double c = g.m[0][0] * r[0] * r[0] + 2.0 * g.m[0][1] * r[0] * r[1] +
                       g.m[1][1] * r[1] * r[1];
      double lo2, hi2;
      if (!quadratic_interval(g.m[2][2], b, c, lo2, hi2)) continue;
      const auto [f2, l2] = node_range(g, 2, lo2, hi2);
      for (int j2 = f2; j2 < l2; ++j2) {
        r[2] = g.coord(2, j2);
        ++out.indicator_calls;
        if (g.quad(r) < 1.0) acc += w[j0] * w[j1] * w[j2];
      }
    }
  }
  out.value = std::clamp(acc * std::pow(std::numbers::pi, -1.5), 0.0, 1.0);
  return out;
}

double collision_prob_gh(const GaussianState& rel, const Ellipsoid& qc, int n) {
  return collision_prob_gh_detailed(rel, qc, n).value;
}

double collision_prob_gh_full_grid(const GaussianState& rel, const Ellipsoid& qc, int n) {
  const Grid g = make_grid(rel, qc, n);
  const auto& w = g.rule->weights;
  double acc = 0.0;
  double r[3] = {0, 0, 0};
  if (g.dim == 2) {
    for (int j0 = 0; j0 < n; ++j0) {
      r[0] = g.coord(0, j0);
      for (int j1 = 0; j1 < n; ++j1) {
        r[1] = g.coord(1, j1);
        if (g.quad(r) < 1.0) acc += w[j0] * w[j1];
      }
    }
    return std::clamp(acc / std::numbers::pi, 0.0, 1.0);
  }
  for (int j0 = 0; j0 < n; ++j0) {
    r[0] = g.coord(0, j0);
    for (int j1 = 0; j1 < n; ++j1) {
      r[1] = g.coord(1, j1);
      for (int j2 = 0; j2 < n; ++j2) {
        r[2] = g.coord(2, j2);
        if (g.quad(r) < 1.0) acc += w[j0] * w[j1] * w[j2];
      }
    }
  }
  return std::clamp(acc * std::pow(std::numbers::pi, -1.5), 0.0, 1.0);
}

}  // namespace ccplan
