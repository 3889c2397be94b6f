#include "ccplan/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>
#include <vector>

#include "ccplan/error.hpp"
#include "ccplan/rng.hpp"
#include "ccplan/special_functions.hpp"

namespace ccplan {

namespace {

struct Whitened {
  Vec y;         // Q^{-1/2} p
  double norm;   // ||y||
  Vec a;         // y / ||y||
  Mat s;         // Q^{-1/2} S Q^{-1/2}
  Mat q_inv_half;
};

Whitened whiten(const Vec& rel_mean, const Mat& cov, const Ellipsoid& qc) {
  if (rel_mean.size() != qc.dim() || cov.rows() != qc.dim() || cov.cols() != qc.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "relative state and region differ in dimension");
  }
  Whitened w;
  w.q_inv_half = sym_inv_sqrt(qc.shape());
  w.y = w.q_inv_half * rel_mean;
  w.norm = w.y.norm();
  if (!(w.norm > 0.0)) {
    throw Error(ErrorKind::kZeroDirection, "relative mean at the origin");
  }
  w.a = w.y / w.norm;
  w.s = symmetrize(w.q_inv_half * cov * w.q_inv_half);
  return w;
}

}  // namespace

double collision_prob_linearized(const GaussianState& rel, const Ellipsoid& qc) {
  validate(rel);
  const Whitened w = whiten(rel.mean, rel.cov, qc);
  const double var = w.a.dot(w.s * w.a);
  const double margin = 1.0 - w.norm;
  if (!(var > 0.0)) return margin > 0.0 ? 1.0 : 0.0;
  return std::clamp(0.5 + 0.5 * std::erf(margin / std::sqrt(2.0 * var)), 0.0, 1.0);
}

double chance_constraint_residual(const Vec& rel_mean, const Mat& cov, const Ellipsoid& qc,
                                  double delta) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw Error(ErrorKind::kOutOfRange, "chance delta must lie in (0, 0.5)");
  }
  const Whitened w = whiten(rel_mean, cov, qc);
  const double var = w.a.dot(w.s * w.a);
  return w.norm - 1.0 - erf_inv(1.0 - 2.0 * delta) * std::sqrt(2.0 * std::max(var, 0.0));
}

ResidualEval chance_constraint_residual_grad(const Vec& rel_mean, const Mat& cov,
                                             const Ellipsoid& qc, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) {
    throw Error(ErrorKind::kOutOfRange, "chance delta must lie in (0, 0.5)");
  }
  const Whitened w = whiten(rel_mean, cov, qc);
  const double kappa = erf_inv(1.0 - 2.0 * delta);
  // r(y) = |y| - 1 - kappa sqrt(2 y^T S y / y^T y)
  const double yy = w.norm * w.norm;
  const Vec sy = w.s * w.y;
  const double ratio = std::max(w.y.dot(sy) / yy, 0.0);
  const double root = std::sqrt(2.0 * ratio);
  ResidualEval out;
  out.value = w.norm - 1.0 - kappa * root;
  Vec dr_dy = w.y / w.norm;
  if (root > 0.0) {
    const Vec dratio = 2.0 * sy / yy - 2.0 * ratio * w.y / yy;
    dr_dy -= kappa * dratio / root;
  }
  out.gradient = w.q_inv_half * dr_dy;
  return out;
}

McEstimate collision_prob_mc(const GaussianState& rel, const Ellipsoid& qc, long samples,
                             std::uint64_t seed, int threads) {
  if (samples < 1000) throw Error(ErrorKind::kOutOfRange, "Monte Carlo needs >= 1000 samples");
  validate(rel);
  const int d = qc.dim();
  if (rel.mean.size() != d) {
    throw Error(ErrorKind::kDimensionMismatch, "relative state and region differ in dimension");
  }
  // Symmetric square root so PSD (singular) covariances are accepted.
  const Mat root = sym_sqrt(rel.cov);
  const Mat& inv = qc.inverse();

  double l[3][3] = {};
  double m[3][3] = {};
  double mu[3] = {};
  for (int i = 0; i < d; ++i) {
    mu[i] = rel.mean(i);
    for (int j = 0; j < d; ++j) {
      l[i][j] = root(i, j);
      m[i][j] = inv(i, j);
    }
  }

  const long chunks = (samples + kMcChunk - 1) / kMcChunk;
  std::vector<long> hits(static_cast<size_t>(chunks), 0);
  auto run_chunk = [&](long c) {
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const long begin = c * kMcChunk;
    const long end = std::min(samples, begin + kMcChunk);
    long count = 0;
    for (long s = begin; s < end; ++s) {
      double z[3], p[3];
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      for (int i = 0; i < d; ++i) {
        double v = mu[i];
        for (int j = 0; j < d; ++j) v += l[i][j] * z[j];
        p[i] = v;
      }
      double q = 0.0;
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) q += m[i][j] * p[i] * p[j];
      }
      if (q < 1.0) ++count;
    }
    hits[static_cast<size_t>(c)] = count;
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(chunks)));
  if (workers == 1) {
    for (long c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (long c = t; c < chunks; c += workers) run_chunk(c);
      });
    }
  }

  long total = 0;
  for (long h : hits) total += h;
  McEstimate out;
  out.samples = samples;
  out.seed = seed;
  out.value = static_cast<double>(total) / static_cast<double>(samples);
  out.half_width_3sigma = 3.0 * std::sqrt(out.value * (1.0 - out.value) / static_cast<double>(samples));
  return out;
}

double collision_prob_center(const GaussianState& rel, const Ellipsoid& qc) {
  validate(rel, /*strict=*/true);
  if (rel.mean.size() != qc.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "relative state and region differ in dimension");
  }
  const int d = qc.dim();
  const Eigen::LLT<Mat> llt(rel.cov);
  const Vec z = llt.matrixL().solve(rel.mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double log_pdf = -0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * log_det - 0.5 * z.squaredNorm();
  return std::clamp(std::exp(log_pdf) * qc.volume(), 0.0, 1.0);
}

}  // namespace ccplan
