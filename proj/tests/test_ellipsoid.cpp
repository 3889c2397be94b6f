#include <doctest.h>

#include <random>

#include "ccplan/ellipsoid.hpp"
#include "ccplan/error.hpp"
#include "ccplan/quadform_cdf.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ccplan;

using testutil::diag;
using testutil::kind_of;

TEST_CASE("sym_eigen orders descending with positive leading component") {
  Mat a(2, 2);
  a << 2, 1, 1, 2;
  const SymEigen e = sym_eigen(a);
  CHECK(e.values(0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(e.values(1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e.vectors(0, 0) > 0.0);
  CHECK(e.vectors(0, 1) > 0.0);
  CHECK((a * e.vectors - e.vectors * e.values.asDiagonal()).norm() < 1e-14);
}

TEST_CASE("ellipsoid rejects invalid shapes") {
  CHECK(kind_of([] { Ellipsoid(Mat::Identity(4, 4)); }) == ErrorKind::kDimensionMismatch);
  CHECK(kind_of([] { Ellipsoid(diag({1.0, -1.0})); }) == ErrorKind::kNotPositiveDefinite);
  CHECK(kind_of([] { Ellipsoid(diag({1.0, 1e-20})); }) == ErrorKind::kDegenerateShape);
  Mat asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK(kind_of([&] { Ellipsoid{asym}; }) == ErrorKind::kNotPositiveDefinite);
}

TEST_CASE("minkowski_outer closed-form cases") {
  const Ellipsoid unit(Mat::Identity(3, 3));
  CHECK((minkowski_outer(unit, unit).shape() - 4.0 * Mat::Identity(3, 3)).norm() < 1e-14);
  const Ellipsoid big(4.0 * Mat::Identity(3, 3));
  CHECK((minkowski_outer(big, unit).shape() - 10.0 * Mat::Identity(3, 3)).norm() < 1e-13);
  CHECK(kind_of([&] { minkowski_outer(unit, Ellipsoid(Mat::Identity(2, 2))); }) ==
        ErrorKind::kDimensionMismatch);
  CHECK(kind_of([&] { minkowski_outer(Ellipsoid(1e14 * Mat::Identity(3, 3)), unit); }) ==
        ErrorKind::kDegenerateShape);
}

TEST_CASE("minkowski_outer contains sampled boundary sums (both argument orders)") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 2 + trial % 2;
    const Mat qx = oracle::random_spd(rng, d, 0.04, 4.0);
    const Mat qo = oracle::random_spd(rng, d, 0.04, 4.0);
    const Ellipsoid ab = minkowski_outer(Ellipsoid(qx), Ellipsoid(qo));
    const Ellipsoid ba = minkowski_outer(Ellipsoid(qo), Ellipsoid(qx));
    double worst = 0.0;
    for (int s = 0; s < 500; ++s) {
      const Vec p = oracle::boundary_point(qx, oracle::unit_direction(rng, d)) +
                    oracle::boundary_point(qo, oracle::unit_direction(rng, d));
      worst = std::max({worst, ab.mahalanobis_sq(p), ba.mahalanobis_sq(p)});
    }
    CHECK(worst <= 1.0 + 1e-9);
  }
}

TEST_CASE("support_point closed forms and errors") {
  const Ellipsoid unit(Mat::Identity(3, 3));
  CHECK((support_point(unit, Vec::Zero(3), Vec::Unit(3, 0)) - Vec::Unit(3, 0)).norm() < 1e-15);
  const Ellipsoid stretched(diag({4.0, 1.0, 1.0}));
  CHECK((support_point(stretched, Vec::Zero(3), Vec::Unit(3, 0)) - 2.0 * Vec::Unit(3, 0)).norm() <
        1e-15);
  CHECK(kind_of([&] { support_point(unit, Vec::Zero(3), Vec::Zero(3)); }) ==
        ErrorKind::kZeroDirection);
}

TEST_CASE("support_point matches sampled argmax") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat q = oracle::random_spd(rng, 3, 0.1, 3.0);
    const Vec c = Vec::Random(3);
    const Vec a = oracle::unit_direction(rng, 3);
    const Vec sp = support_point(Ellipsoid(q), c, a);
    Vec best = c;
    double best_val = -1e300;
    for (int s = 0; s < 100000; ++s) {
      const Vec x = c + oracle::boundary_point(q, oracle::unit_direction(rng, 3));
      if (a.dot(x) > best_val) {
        best_val = a.dot(x);
        best = x;
      }
    }
    CHECK(a.dot(sp) >= best_val - 1e-12);
    CHECK((sp - best).norm() < 1e-1);  // argmax location (sampling resolution)
    CHECK(a.dot(sp) - best_val < 1e-3);
    CHECK(Ellipsoid(q).mahalanobis_sq(sp - c) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("to_principal_axes diagonalises and preserves trace") {
  Mat cov(2, 2);
  cov << 2, 1, 1, 2;
  const PrincipalAxes pa =
      to_principal_axes(GaussianState{Vec::Ones(2), cov}, Ellipsoid(Mat::Identity(2, 2)));
  CHECK(pa.rel.cov(0, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(pa.rel.cov(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(pa.rel.cov(0, 1)) < 1e-10);

  const Mat d = diag({3.0, 2.0, 1.0});
  const Ellipsoid qc(diag({2.0, 1.0, 0.5}));
  const PrincipalAxes same = to_principal_axes(GaussianState{Vec::Ones(3), d}, qc);
  CHECK((same.rel.cov - d).norm() < 1e-15);
  CHECK((same.region.shape() - qc.shape()).norm() < 1e-15);
  CHECK((same.rotation - Mat::Identity(3, 3)).norm() < 1e-15);

  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const Mat c = oracle::random_spd(rng, 3, 0.01, 2.0);
    const PrincipalAxes r = to_principal_axes(GaussianState{Vec::Random(3), c}, qc);
    CHECK(std::abs(r.rel.cov.trace() - c.trace()) < 1e-10);
    CHECK((r.rel.cov - Mat(r.rel.cov.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK(kind_of([&] { to_principal_axes(GaussianState{Vec::Zero(3), diag({1, 1, 0})}, qc); }) ==
        ErrorKind::kSingularCovariance);
}

TEST_CASE("collision probability is invariant under the principal-axis transform") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const Mat c = oracle::random_spd(rng, 3, 0.05, 2.0);
    const Ellipsoid qc(oracle::random_spd(rng, 3, 0.2, 3.0));
    const GaussianState rel{Vec::Random(3), c};
    const PrincipalAxes pa = to_principal_axes(rel, qc);
    CHECK(std::abs(collision_prob_exact(rel, qc) - collision_prob_exact(pa.rel, pa.region)) < 1e-9);
  }
}

TEST_CASE("MinkowskiSumTest agrees with boundary sampling") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 10; ++t) {
    const int d = 2 + t % 2;
    const Mat qa = oracle::random_spd(rng, d, 0.05, 2.0);
    const Mat qb = oracle::random_spd(rng, d, 0.05, 2.0);
    const MinkowskiSumTest test{Ellipsoid(qa), Ellipsoid(qb)};
    // Sums of interior points are inside.
    for (int s = 0; s < 2000; ++s) {
      std::uniform_real_distribution<double> u(0.0, 0.999);
      const Vec p = u(rng) * oracle::boundary_point(qa, oracle::unit_direction(rng, d)) +
                    u(rng) * oracle::boundary_point(qb, oracle::unit_direction(rng, d));
      CHECK(test.contains(p));
    }
    // The sum of support points lies on the boundary of the true sum.
    for (int s = 0; s < 200; ++s) {
      const Vec dir = oracle::unit_direction(rng, d);
      const Vec edge = qa * dir / std::sqrt(dir.dot(qa * dir)) + qb * dir / std::sqrt(dir.dot(qb * dir));
      CHECK_FALSE(test.contains(Vec(1.001 * edge)));
      CHECK(test.contains(Vec(0.999 * edge)));
    }
  }
  CHECK(ellipsoids_overlap(Vec::Zero(3), Ellipsoid(Mat::Identity(3, 3)), Vec::Unit(3, 0) * 1.99,
                           Ellipsoid(Mat::Identity(3, 3))));
  CHECK_FALSE(ellipsoids_overlap(Vec::Zero(3), Ellipsoid(Mat::Identity(3, 3)),
                                 Vec::Unit(3, 0) * 2.01, Ellipsoid(Mat::Identity(3, 3))));
}
