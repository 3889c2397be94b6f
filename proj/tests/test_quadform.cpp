#include <doctest.h>

#include <chrono>
#include <random>

#include "ccplan/ellipsoid.hpp"
#include "ccplan/quadform_cdf.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ccplan;
using testutil::diag;
using testutil::kind_of;
using testutil::vec;

namespace {

QuadFormProblem central(int d, double q) {
  return {Mat::Identity(d, d), Vec::Zero(d), Mat::Identity(d, d), q};
}

}  // namespace

TEST_CASE("central isotropic forms match chi-square closed forms") {
  for (int d = 1; d <= 3; ++d) {
    for (double q : {0.05, 0.3, 1.0, 2.5, 7.0, 15.0}) {
      const SeriesResult r = cdf_quadform(central(d, q));
      CAPTURE(d);
      CAPTURE(q);
      CHECK(std::abs(r.value - oracle::chi2_cdf_small(q, d)) < 1e-8);
      CHECK(r.truncation_bound >= 0.0);
    }
  }
  CHECK(cdf_quadform(central(1, 1.0)).value == doctest::Approx(0.682689492137).epsilon(1e-11));
  CHECK(cdf_quadform(central(3, 1.0)).value == doctest::Approx(0.198748043099).epsilon(1e-11));
}

TEST_CASE("collision_prob_exact on the unit region is fast") {
  const GaussianState rel{Vec::Zero(3), Mat::Identity(3, 3)};
  const Ellipsoid qc(Mat::Identity(3, 3));
  const int reps = 200;
  double v = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) v += collision_prob_exact(rel, qc);
  const double per_call_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
      reps;
  CHECK(v / reps == doctest::Approx(0.198748043099).epsilon(1e-9));
  CHECK(per_call_ms < 1.0);
}

TEST_CASE("one-dimensional noncentral forms match the two-tail formula") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) {
    const double a = 0.1 + 3.0 * u(rng);
    const double mu = -3.0 + 6.0 * u(rng);
    const double sigma = 0.05 + 2.0 * u(rng);
    const double q = 0.05 + 4.0 * u(rng);
    const QuadFormProblem p{diag({a}), vec({mu}), diag({sigma * sigma}), q};
    CAPTURE(a);
    CAPTURE(mu);
    CAPTURE(sigma);
    CAPTURE(q);
    CHECK(std::abs(cdf_quadform(p).value - oracle::quadform_1d(a, mu, sigma, q)) < 1e-8);
  }
}

TEST_CASE("isotropic three-dimensional forms match radial integration") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const Vec dir = oracle::unit_direction(rng, 3);
    const double nu = 0.1 + 3.0 * u(rng);
    const double sigma = 0.2 + 1.5 * u(rng);
    const double r = 0.3 + 2.0 * u(rng);
    const QuadFormProblem p{Mat::Identity(3, 3), nu * dir, sigma * sigma * Mat::Identity(3, 3),
                            r * r};
    CHECK(std::abs(cdf_quadform(p).value - oracle::radial_cdf_3d(nu, sigma, r)) < 1e-7);
  }
}

TEST_CASE("anisotropic example agrees with a frozen 1e7-sample Monte Carlo run") {
  // Frozen from oracle::mc_quadform(A, mu, cov, 1.0, 10'000'000, seed 12345):
  // p = 0.6980243, 3-sigma half width 0.0004356.
  const QuadFormProblem p{diag({1.0, 0.25, 1.0 / 9.0}), vec({0.5, -0.3, 0.2}),
                          diag({0.5, 0.3, 0.4}), 1.0};
  const double v = cdf_quadform(p).value;
  CHECK(std::abs(v - 0.6980243) <= 0.0004356);

  const oracle::McResult live = oracle::mc_quadform(p.a_matrix, p.mean, p.cov, 1.0, 200000, 99);
  CHECK(std::abs(v - live.p) <= live.half_width);
}

TEST_CASE("both series routes agree where both are usable") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int compared = 0;
  for (int i = 0; i < 200; ++i) {
    const int d = 2 + i % 2;
    const Mat a = oracle::random_spd(rng, d, 0.3, 3.0);
    const Mat cov = oracle::random_spd(rng, d, 0.2, 1.5);
    const Vec mu = (0.2 + 1.5 * u(rng)) * oracle::unit_direction(rng, d);
    const QuadFormProblem p{a, mu, cov, 1.0};
    SeriesResult ps;
    try {
      ps = cdf_quadform(p, 1e-10, SeriesMethod::kPowerSeries);
    } catch (const Error&) {
      continue;
    }
    const SeriesResult mix = cdf_quadform(p, 1e-10, SeriesMethod::kChiSquareMixture);
    CHECK(ps.method == SeriesMethod::kPowerSeries);
    CHECK(mix.method == SeriesMethod::kChiSquareMixture);
    CHECK(std::abs(ps.value - mix.value) < 1e-8);
    ++compared;
  }
  CHECK(compared > 150);
}

TEST_CASE("random instances agree with the sampling oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int outside = 0;
  const int cases = 60;
  for (int i = 0; i < cases; ++i) {
    const int d = 2 + i % 2;
    const Mat a = oracle::random_spd(rng, d, 0.2, 4.0);
    const Mat cov = oracle::random_spd(rng, d, 0.01, 2.0);
    const Vec mu = 3.0 * u(rng) * oracle::unit_direction(rng, d);
    const double v = cdf_quadform({a, mu, cov, 1.0}).value;
    const oracle::McResult mc = oracle::mc_quadform(a, mu, cov, 1.0, 100000, 1000 + i);
    if (std::abs(v - mc.p) > mc.half_width + 1e-5) ++outside;
  }
  CHECK(outside <= 2);
}

TEST_CASE("moving the mean outward never increases the probability") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const int d = 2 + i % 2;
    const Ellipsoid qc(oracle::random_spd(rng, d, 0.1, 4.0));
    const Mat cov = oracle::random_spd(rng, d, 0.01, 2.0);
    const Vec mu = (0.05 + u(rng)) * oracle::unit_direction(rng, d);
    double prev = 2.0;
    for (double t = 1.0; t <= 6.0; t += 0.25) {
      const double v = collision_prob_exact({t * mu, cov}, qc);
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      CHECK(v <= prev + 1e-9);
      prev = v;
    }
  }
}

TEST_CASE("far and concentrated extremes") {
  const Ellipsoid unit(Mat::Identity(3, 3));
  CHECK(collision_prob_exact({vec({1000.0, 0.0, 0.0}), Mat::Identity(3, 3)}, unit) < 1e-12);
  CHECK(collision_prob_exact({Vec::Zero(3), 1e-6 * Mat::Identity(3, 3)}, unit) > 1.0 - 1e-9);
  CHECK(collision_prob_exact({vec({0.5, 0.0, 0.0}), 1e-4 * Mat::Identity(3, 3)}, unit) >
        1.0 - 1e-9);
  CHECK(collision_prob_exact({vec({1.5, 0.0, 0.0}), 1e-4 * Mat::Identity(3, 3)}, unit) < 1e-12);
}

TEST_CASE("the alternating series refuses inputs it cannot resolve") {
  // q / (2 lambda) = 50 per axis: the alternating terms reach ~e^150.
  const QuadFormProblem tight{Mat::Identity(3, 3), vec({0.5, 0.0, 0.0}),
                              0.01 * Mat::Identity(3, 3), 1.0};
  CHECK(kind_of([&] { cdf_quadform(tight, 1e-9, SeriesMethod::kPowerSeries); }) ==
        ErrorKind::kNonConvergence);
  const SeriesResult r = cdf_quadform(tight);
  CHECK(r.method == SeriesMethod::kChiSquareMixture);
  CHECK(r.value > 0.99);
}

TEST_CASE("invalid quadratic-form inputs are rejected") {
  const QuadFormProblem ok = central(2, 1.0);
  CHECK(kind_of([&] { cdf_quadform(ok, 0.0); }) == ErrorKind::kOutOfRange);
  CHECK(kind_of([&] { cdf_quadform(ok, -1.0); }) == ErrorKind::kOutOfRange);
  QuadFormProblem bad = ok;
  bad.cov = diag({1.0, -0.5});
  CHECK(kind_of([&] { cdf_quadform(bad); }) == ErrorKind::kNotPositiveDefinite);
  bad = ok;
  bad.mean = Vec::Zero(3);
  CHECK(kind_of([&] { cdf_quadform(bad); }) == ErrorKind::kDimensionMismatch);
  bad = ok;
  bad.a_matrix(0, 1) = 0.3;
  CHECK(kind_of([&] { cdf_quadform(bad); }) == ErrorKind::kNotPositiveDefinite);
}
