#pragma once

// Test-only reference computations. Deliberately independent of the library
// code paths they check: std::mt19937_64 sampling, brute-force enumeration,
// fine-step integration and finite differences.

#include <cmath>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace oracle {

/// Uniform point on the unit sphere S^{d-1}.
inline Eigen::VectorXd unit_direction(std::mt19937_64& rng, int d) {
  std::normal_distribution<double> n01;
  Eigen::VectorXd v(d);
  do {
    for (int i = 0; i < d; ++i) v(i) = n01(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

/// Random symmetric positive-definite matrix with eigenvalues in [lo, hi].
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = n01(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd ev(d);
  for (int i = 0; i < d; ++i) ev(i) = u(rng);
  Eigen::MatrixXd m = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

/// Boundary point of {x : x^T Q^{-1} x <= 1} reached along direction u.
inline Eigen::VectorXd boundary_point(const Eigen::MatrixXd& q, const Eigen::VectorXd& u) {
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(q).matrixL();
  return l * u;  // u on the unit sphere maps onto the ellipsoid surface
}

/// Plain Monte Carlo of P(p^T A p <= q), p ~ N(mu, cov), with the 3-sigma
/// half width. Uses std::normal_distribution, not the library generator.
struct McResult {
  double p;
  double half_width;
};

inline McResult mc_quadform(const Eigen::MatrixXd& a, const Eigen::VectorXd& mu,
                            const Eigen::MatrixXd& cov, double q, long samples,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  const int d = static_cast<int>(mu.size());
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
  long hits = 0;
  Eigen::VectorXd z(d);
  for (long s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) z(i) = n01(rng);
    const Eigen::VectorXd p = mu + l * z;
    if (p.dot(a * p) <= q) ++hits;
  }
  const double p = static_cast<double>(hits) / samples;
  return {p, 3.0 * std::sqrt(p * (1.0 - p) / samples)};
}

/// Central chi-square CDF at x for 1, 2 or 3 degrees of freedom.
inline double chi2_cdf_small(double x, int dof) {
  switch (dof) {
    case 1: return std::erf(std::sqrt(x / 2.0));
    case 2: return 1.0 - std::exp(-x / 2.0);
    case 3:
      return std::erf(std::sqrt(x / 2.0)) -
             std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-x / 2.0);
    default: return NAN;
  }
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// P(a x^2 <= q) for scalar x ~ N(mu, sigma^2): two normal tails.
inline double quadform_1d(double a, double mu, double sigma, double q) {
  const double r = std::sqrt(q / a);
  return normal_cdf((r - mu) / sigma) - normal_cdf((-r - mu) / sigma);
}

/// P(|x| <= r) for x ~ N(m, sigma^2 I_3), |m| = nu > 0, by composite Simpson
/// on the radial density
///   f(t) = t / (nu sigma sqrt(2 pi)) [exp(-(t-nu)^2 / 2 sigma^2) - exp(-(t+nu)^2 / 2 sigma^2)].
inline double radial_cdf_3d(double nu, double sigma, double r, int intervals = 20000) {
  auto f = [&](double t) {
    const double s2 = 2.0 * sigma * sigma;
    return t / (nu * sigma * std::sqrt(2.0 * std::numbers::pi)) *
           (std::exp(-(t - nu) * (t - nu) / s2) - std::exp(-(t + nu) * (t + nu) / s2));
  };
  const double h = r / intervals;
  double sum = f(0.0) + f(r);
  for (int i = 1; i < intervals; ++i) sum += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

/// Central-difference Jacobian of f at x.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), x.size());
  for (int k = 0; k < x.size(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    j.col(k) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// Test-side quadrotor vector field written with Eigen::AngleAxis instead of
// the library's expanded trigonometry.
inline Eigen::VectorXd quad_field(const Eigen::VectorXd& x, const Eigen::VectorXd& u, double m, double g) {
  const Eigen::Matrix3d r = (Eigen::AngleAxisd(x(8), Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(x(7), Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(x(6), Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
  Eigen::VectorXd dx(9);
  dx.head(3) = x.segment(3, 3);
  dx.segment(3, 3) = r * Eigen::Vector3d(0, 0, u(3) / m) - Eigen::Vector3d(0, 0, g);
  dx.tail(3) = u.head(3);
  return dx;
}

/// Fine-step RK4 of the test-side field over `duration` (no angle wrapping).
inline Eigen::VectorXd fine_integrate(Eigen::VectorXd x, const Eigen::VectorXd& u, double duration,
                               int substeps, double m = 1.0, double g = 9.81) {
  const double h = duration / substeps;
  for (int i = 0; i < substeps; ++i) {
    const Eigen::VectorXd k1 = quad_field(x, u, m, g);
    const Eigen::VectorXd k2 = quad_field(x + 0.5 * h * k1, u, m, g);
    const Eigen::VectorXd k3 = quad_field(x + 0.5 * h * k2, u, m, g);
    const Eigen::VectorXd k4 = quad_field(x + h * k3, u, m, g);
    x += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  return x;
}

}  // namespace oracle
