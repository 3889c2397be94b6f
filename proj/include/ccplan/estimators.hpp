#pragma once

#include <cstdint>

#include "ccplan/ellipsoid.hpp"

namespace ccplan {

/// Linearised collision probability: mass of the half-space tangent to the
/// collision ellipsoid in the whitened (Q^{-1/2}) frame, facing the mean.
///   P_l = 1/2 + 1/2 erf((1 - a^T Q^{-1/2} p) / sqrt(2 a^T Q^{-1/2} S Q^{-1/2} a)),
///   a = Q^{-1/2} p / ||Q^{-1/2} p||.
/// Throws kZeroDirection when the mean is at the origin; callers treat that
/// case as probability 1.
double collision_prob_linearized(const GaussianState& rel, const Ellipsoid& qc);

struct ResidualEval {
  double value = 0.0;
  Vec gradient;  ///< d value / d rel_mean
};

/// Deterministic form of P_l <= delta:
///   a^T Q^{-1/2} p - 1 - erfinv(1 - 2 delta) sqrt(2 a^T Q^{-1/2} S Q^{-1/2} a),
/// positive iff the chance constraint holds. 0 < delta < 1/2.
double chance_constraint_residual(const Vec& rel_mean, const Mat& cov, const Ellipsoid& qc,
                                  double delta);

/// Residual with its analytic gradient with respect to the relative mean.
ResidualEval chance_constraint_residual_grad(const Vec& rel_mean, const Mat& cov,
                                             const Ellipsoid& qc, double delta);

struct McEstimate {
  double value = 0.0;
  double half_width_3sigma = 0.0;
  long samples = 0;
  std::uint64_t seed = 0;
};

constexpr long kMcChunk = 1 << 16;

/// Plain Monte Carlo estimate of P(p^T Qc^{-1} p < 1). Samples are drawn in
/// fixed-size chunks, each chunk on its own derived stream, so the result is
/// identical for any thread count. samples >= 1000.
McEstimate collision_prob_mc(const GaussianState& rel, const Ellipsoid& qc, long samples,
                             std::uint64_t seed, int threads = 1);

/// Density of the relative position at the region centre times the region's
/// volume, clamped to [0, 1].
double collision_prob_center(const GaussianState& rel, const Ellipsoid& qc);

}  // namespace ccplan
