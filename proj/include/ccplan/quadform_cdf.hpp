#pragma once

#include <optional>

#include "ccplan/ellipsoid.hpp"

namespace ccplan {

/// v = p^T A p with p ~ N(mean, cov); F_v(q) = P(v <= q).
struct QuadFormProblem {
  Mat a_matrix;
  Vec mean;
  Mat cov;
  double q = 1.0;
};

/// Diagonal representation v = sum_i lambda_i (w_i + b_i)^2, w ~ N(0, I):
/// lambda = eig(cov^{1/2} A cov^{1/2}), b = P^T cov^{-1/2} mean.
struct QuadFormSpectrum {
  Vec lambda;
  Vec b;
};

enum class SeriesMethod {
  kPowerSeries,       ///< alternating power series in q
  kChiSquareMixture,  ///< same expansion re-centred as a chi-square mixture
};

struct SeriesResult {
  double value = 0.0;
  int terms_used = 0;
  /// Power series: magnitude of the last term (heuristic).
  /// Mixture: rigorous bound on the neglected tail.
  double truncation_bound = 0.0;
  SeriesMethod method = SeriesMethod::kPowerSeries;
};

QuadFormSpectrum diagonalize(const QuadFormProblem& p);

/// F_v(q) by the series expansion. The alternating power series is used when
/// its cancellation error stays below tol; otherwise the chi-square mixture
/// form (positive terms) is evaluated. `force` pins one route (throws
/// kNonConvergence if the forced power series cannot reach tol).
SeriesResult cdf_quadform(const QuadFormProblem& p, double tol = 1e-9,
                          std::optional<SeriesMethod> force = std::nullopt);

SeriesResult cdf_quadform(const QuadFormSpectrum& s, double q, double tol = 1e-9,
                          std::optional<SeriesMethod> force = std::nullopt);

/// P(p^T Qc^{-1} p < 1) for p ~ rel: the collision-probability upper bound.
double collision_prob_exact(const GaussianState& rel, const Ellipsoid& qc, double tol = 1e-9);

}  // namespace ccplan
