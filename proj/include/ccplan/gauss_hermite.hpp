#pragma once

#include <vector>

#include "ccplan/ellipsoid.hpp"

namespace ccplan {

/// Gauss-Hermite rule for the weight exp(-z^2): nodes are the roots of the
/// physicists' Hermite polynomial H_n (ascending), weights
/// w_j = 2^{n-1} n! sqrt(pi) / (n^2 H_{n-1}(z_j)^2).
struct HermiteRule {
  int n = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

constexpr int kMaxHermiteNodes = 512;
constexpr int kDefaultPrimitiveNodes = 10;

/// Uncached construction (Golub-Welsch start, Newton polish).
HermiteRule compute_hermite_rule(int n);

/// Memoised rule; safe to call concurrently. 1 <= n <= 512.
const HermiteRule& hermite_rule(int n);

struct GhEvaluation {
  double value = 0.0;
  long grid_points = 0;      ///< n^d
  long indicator_calls = 0;  ///< points actually tested after pruning
};

/// Tensor-product quadrature of the collision indicator after the
/// principal-axis transform:
///   pi^{-d/2} sum_j (prod_i w_{j_i}) I(sqrt(2) sigma z_j + mu).
/// Points outside the region's bounding intervals are skipped; the skipped
/// terms are exactly zero so the sum is bit-identical to the full grid.
GhEvaluation collision_prob_gh_detailed(const GaussianState& rel, const Ellipsoid& qc, int n);

double collision_prob_gh(const GaussianState& rel, const Ellipsoid& qc,
                         int n = kDefaultPrimitiveNodes);

/// Full n^d loop without pruning; reference for the pruned evaluator.
double collision_prob_gh_full_grid(const GaussianState& rel, const Ellipsoid& qc, int n);

}  // namespace ccplan
