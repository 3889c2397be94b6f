#include "ccplan/quadform_cdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "ccplan/error.hpp"
#include "ccplan/special_functions.hpp"

namespace ccplan {

namespace {

constexpr int kMaxPowerTerms = 500;
constexpr long kMaxMixtureTerms = 5'000'000;
constexpr double kEps = 2.220446049250313e-16;
constexpr double kLn10 = 2.302585092994046;

struct PowerOutcome {
  bool ok = false;
  SeriesResult result;
};

// Alternating series F(q) = sum_k (-1)^k c_k q^{n/2+k} / Gamma(n/2+k+1).
// Works with c'_k = c_k q^k so the recurrences only involve q / (2 lambda).
PowerOutcome power_series(const QuadFormSpectrum& s, double q, double tol) {
  const int n = static_cast<int>(s.lambda.size());
  const double half_n = 0.5 * n;
  std::vector<double> rho(n), b2(n), rho_pow(n, 1.0);
  double log_c0 = 0.0;
  for (int i = 0; i < n; ++i) {
    rho[i] = q / (2.0 * s.lambda(i));
    b2[i] = s.b(i) * s.b(i);
    log_c0 += -0.5 * b2[i] - 0.5 * std::log(2.0 * s.lambda(i));
  }

  // c'_k = c_hat_k * exp(log_scale); rescaled when c_hat grows past 1e100.
  std::vector<double> c_hat{1.0};
  std::vector<double> d{0.0};
  double log_scale = log_c0;
  const double log_q_half_n = half_n * std::log(q);

  double sum = 0.0;
  double abs_sum = 0.0;
  double prev_abs = std::numeric_limits<double>::infinity();
  int decaying = 0;

  for (int k = 0; k < kMaxPowerTerms; ++k) {
    if (k > 0) {
      double dk = 0.0;
      for (int i = 0; i < n; ++i) {
        rho_pow[i] *= rho[i];
        if (rho_pow[i] > 1e280) return {};
        dk += 0.5 * (1.0 - k * b2[i]) * rho_pow[i];
      }
      d.push_back(dk);
      double ck = 0.0;
      for (int i = 0; i < k; ++i) ck += d[k - i] * c_hat[i];
      ck /= k;
      c_hat.push_back(ck);
      if (std::abs(ck) > 1e100) {
        for (double& c : c_hat) c *= 1e-100;
        log_scale += 100.0 * kLn10;
      }
    }
    const double ck = c_hat[k];
    double term = 0.0;
    if (ck != 0.0) {
      const double log_mag = std::log(std::abs(ck)) + log_scale + log_q_half_n -
                             std::lgamma(half_n + k + 1.0);
      if (log_mag > 700.0) return {};
      term = std::exp(log_mag);
      const bool negative = (ck < 0.0) != (k % 2 == 1);
      term = negative ? -term : term;
    }
    sum += term;
    abs_sum += std::abs(term);
    const double mag = std::abs(term);
    decaying = mag < prev_abs ? decaying + 1 : 0;
    prev_abs = mag;
    if (k > 0 && mag < 0.1 * tol && decaying >= 3) {
      // Rounding in the alternating sum is roughly eps times the largest
      // partial magnitudes; reject the route if that exceeds the budget.
      if (8.0 * kEps * abs_sum > 0.1 * tol) return {};
      PowerOutcome out;
      out.ok = true;
      out.result.value = std::clamp(sum, 0.0, 1.0);
      out.result.terms_used = k + 1;
      out.result.truncation_bound = mag;
      out.result.method = SeriesMethod::kPowerSeries;
      return out;
    }
  }
  return {};
}

// Polynomial helpers on coefficient vectors (lowest degree first).
std::vector<double> poly_mul(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

void poly_add_scaled(std::vector<double>& acc, const std::vector<double>& p, double scale) {
  if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
  for (size_t i = 0; i < p.size(); ++i) acc[i] += scale * p[i];
}

// Chi-square mixture F(q) = sum_k e_k P(chi^2_{n+2k} <= q / beta), beta =
// min lambda. With gamma_i = 1 - beta / lambda_i in [0, 1) the weights are
// the coefficients of
//   H(s) = prod_i sqrt(beta/lambda_i) exp(-b_i^2/2)
//          (1 - gamma_i s)^{-1/2} exp(c_i s / (1 - gamma_i s)),
//   c_i = b_i^2 beta / (2 lambda_i),
// all nonnegative and summing to one. H'/H is rational, N(s)/D(s), which
// yields a fixed-order linear recurrence for e_k.
SeriesResult chi2_mixture(const QuadFormSpectrum& s, double q, double tol) {
  const int n = static_cast<int>(s.lambda.size());
  const double beta = s.lambda.minCoeff();
  std::vector<double> gamma(n), c(n);
  double log_e0 = 0.0;
  for (int i = 0; i < n; ++i) {
    gamma[i] = std::max(0.0, 1.0 - beta / s.lambda(i));
    c[i] = 0.5 * s.b(i) * s.b(i) * beta / s.lambda(i);
    log_e0 += 0.5 * std::log(beta / s.lambda(i)) - 0.5 * s.b(i) * s.b(i);
  }

  // D(s) = prod_i (1 - gamma_i s)^2 ; N(s) = D(s) * H'(s)/H(s).
  std::vector<double> den{1.0};
  std::vector<std::vector<double>> partial(n, std::vector<double>{1.0});
  for (int i = 0; i < n; ++i) {
    const std::vector<double> sq = {1.0, -2.0 * gamma[i], gamma[i] * gamma[i]};
    den = poly_mul(den, sq);
    for (int j = 0; j < n; ++j) {
      if (j != i) partial[j] = poly_mul(partial[j], sq);
    }
  }
  std::vector<double> num{0.0};
  for (int i = 0; i < n; ++i) {
    poly_add_scaled(num, poly_mul(partial[i], {1.0, -gamma[i]}), 0.5 * gamma[i]);
    poly_add_scaled(num, partial[i], c[i]);
  }
  const int deg_den = static_cast<int>(den.size()) - 1;
  const int deg_num = static_cast<int>(num.size()) - 1;
  const int window = std::max(deg_den, deg_num + 1) + 1;

  // Ring buffer of recent e_hat values; e_k = e_hat_k * exp(log_scale).
  std::vector<double> ring(static_cast<size_t>(window), 0.0);
  auto at = [&](long k) -> double& { return ring[static_cast<size_t>(k % window)]; };
  double log_scale = 0.0;
  double e0 = 1.0;
  if (log_e0 > -600.0) {
    e0 = std::exp(log_e0);
  } else {
    log_scale = log_e0;
  }
  at(0) = e0;

  // Upward ladder for P(a, y), a = n/2 + k, y = q / (2 beta):
  //   P(a + 1, y) = P(a, y) - y^a e^{-y} / Gamma(a + 1).
  const double y = 0.5 * q / beta;
  const double log_y = std::log(y);
  double a = 0.5 * n;
  double p_k = gamma_p(a, y);

  // Compensated sums: the mass must approach 1 to within tol, so plain
  // accumulation over ~1e5 terms would stall on rounding.
  double mass = 0.0, mass_c = 0.0;  // sum of e_hat
  double acc = 0.0, acc_c = 0.0;    // sum of e_hat * P_k
  auto kahan = [](double& sum, double& c, double x) {
    const double yk = x - c;
    const double t = sum + yk;
    c = (t - sum) - yk;
    sum = t;
  };
  SeriesResult out;
  out.method = SeriesMethod::kChiSquareMixture;

  for (long k = 0; k < kMaxMixtureTerms; ++k) {
    if (k > 0) {
      // (k) e_k = sum_j N_j e_{k-1-j} - sum_{j>=1} D_j (k - j) e_{k-j}
      double rhs = 0.0;
      for (int j = 0; j <= deg_num && j <= k - 1; ++j) rhs += num[j] * at(k - 1 - j);
      for (int j = 1; j <= deg_den && j <= k; ++j) rhs -= den[j] * static_cast<double>(k - j) * at(k - j);
      double ek = rhs / static_cast<double>(k);
      if (ek < 0.0) ek = 0.0;  // weights are nonnegative; clip rounding noise
      at(k) = ek;
      if (ek > 1e250) {
        for (double& v : ring) v *= 1e-250;
        mass *= 1e-250;
        mass_c *= 1e-250;
        acc *= 1e-250;
        acc_c *= 1e-250;
        log_scale += 250.0 * kLn10;
      }
      if (log_scale != 0.0 && log_scale > -600.0) {
        const double f = std::exp(log_scale);
        for (double& v : ring) v *= f;
        mass *= f;
        mass_c *= f;
        acc *= f;
        acc_c *= f;
        log_scale = 0.0;
      }
      // Advance the ladder from a = n/2 + k - 1.
      const double log_t = (a)*log_y - y - std::lgamma(a + 1.0);
      p_k = std::max(0.0, p_k - std::exp(log_t));
      a += 1.0;
    }
    const double ek = at(k);
    kahan(mass, mass_c, ek);
    kahan(acc, acc_c, ek * p_k);
    const double true_mass = log_scale == 0.0 ? mass : mass * std::exp(log_scale);
    const double tail = std::max(0.0, 1.0 - true_mass) * p_k;
    // The recurrence carries a relative error of a few ulps per step, so the
    // computed mass cannot certify a deficit smaller than that floor.
    const double floor = 8.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(k + 1);
    if (k > 0 && (tail < 0.1 * tol || (1.0 - true_mass) < floor)) {
      out.value = std::clamp(log_scale == 0.0 ? acc : acc * std::exp(log_scale), 0.0, 1.0);
      out.terms_used = static_cast<int>(k + 1);
      out.truncation_bound = tail;
      return out;
    }
  }
  throw Error(ErrorKind::kNonConvergence,
              "chi-square mixture did not converge (extreme eigenvalue spread)");
}

}  // namespace

QuadFormSpectrum diagonalize(const QuadFormProblem& p) {
  const Eigen::Index n = p.mean.size();
  if (n < 1 || n > 3 || p.a_matrix.rows() != n || p.a_matrix.cols() != n || p.cov.rows() != n ||
      p.cov.cols() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "quadratic-form operands disagree in size");
  }
  if (!p.a_matrix.allFinite() || !p.cov.allFinite() || !p.mean.allFinite()) {
    throw Error(ErrorKind::kInvalidInput, "quadratic-form operands are not finite");
  }
  if (!is_symmetric(p.a_matrix, 1e-10) || !is_symmetric(p.cov, 1e-10)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "quadratic-form matrices must be symmetric");
  }
  const SymEigen ec = sym_eigen(p.cov);
  if (!(ec.values(n - 1) > 0.0)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "covariance must be positive definite");
  }
  if (!(sym_eigen(p.a_matrix).values(n - 1) > 0.0)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "A must be positive definite");
  }
  const Vec sd = ec.values.cwiseSqrt();
  const Mat cov_half = ec.vectors * sd.asDiagonal() * ec.vectors.transpose();
  const Mat cov_inv_half = ec.vectors * sd.cwiseInverse().asDiagonal() * ec.vectors.transpose();
  const SymEigen e = sym_eigen(symmetrize(cov_half * p.a_matrix * cov_half));
  if (!(e.values(n - 1) > 0.0)) {
    throw Error(ErrorKind::kNotPositiveDefinite, "cov^{1/2} A cov^{1/2} is singular");
  }
  return {e.values, e.vectors.transpose() * (cov_inv_half * p.mean)};
}

SeriesResult cdf_quadform(const QuadFormSpectrum& s, double q, double tol,
                          std::optional<SeriesMethod> force) {
  if (!(tol > 0.0)) throw Error(ErrorKind::kOutOfRange, "tolerance must be positive");
  if (!(q > 0.0)) {
    SeriesResult zero;
    zero.terms_used = 0;
    return zero;
  }
  if (force != SeriesMethod::kChiSquareMixture) {
    // sum q / (2 lambda) estimates log of the largest partial magnitude; past
    // ~30 the alternating sum cannot hold 1e-9 in double precision.
    double spread = 0.0;
    for (Eigen::Index i = 0; i < s.lambda.size(); ++i) spread += q / (2.0 * s.lambda(i));
    if (force == SeriesMethod::kPowerSeries || spread < 30.0) {
      const PowerOutcome p = power_series(s, q, tol);
      if (p.ok) return p.result;
      if (force == SeriesMethod::kPowerSeries) {
        throw Error(ErrorKind::kNonConvergence,
                    "power series did not reach the tolerance within the term cap");
      }
    }
  }
  return chi2_mixture(s, q, tol);
}

SeriesResult cdf_quadform(const QuadFormProblem& p, double tol, std::optional<SeriesMethod> force) {
  return cdf_quadform(diagonalize(p), p.q, tol, force);
}

double collision_prob_exact(const GaussianState& rel, const Ellipsoid& qc, double tol) {
  if (rel.mean.size() != qc.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "relative state and region differ in dimension");
  }
  return cdf_quadform(QuadFormProblem{qc.inverse(), rel.mean, rel.cov, 1.0}, tol).value;
}

}  // namespace ccplan
