#include <doctest.h>

#include <random>

#include "ccplan/corridor.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ccplan;
using testutil::kind_of;
using testutil::vec;

namespace {

// Random bounded polyhedron around the origin: halfspaces tangent to a
// sphere of random radius in random directions, plus a bounding box.
Polyhedron random_polyhedron(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.5, 3.0);
  const int faces = 4 + static_cast<int>(rng() % 6);
  Mat a(faces + 2 * d, d);
  Vec b(faces + 2 * d);
  for (int i = 0; i < faces; ++i) {
    a.row(i) = 2.5 * oracle::unit_direction(rng, d).transpose();  // unnormalised on purpose
    b(i) = 2.5 * u(rng);
  }
  for (int k = 0; k < d; ++k) {
    a.row(faces + 2 * k) = Vec::Unit(d, k).transpose();
    a.row(faces + 2 * k + 1) = -Vec::Unit(d, k).transpose();
    b(faces + 2 * k) = b(faces + 2 * k + 1) = 4.0;
  }
  return Polyhedron(a, b);
}

}  // namespace

TEST_CASE("cube residual closed forms") {
  const Polyhedron cube = Polyhedron::box(vec({-1, -1, -1}), vec({1, 1, 1}));
  const Ellipsoid ball = Ellipsoid(Mat::Identity(3, 3)).scaled(0.25);  // radius 0.5
  const Vec r0 = corridor_residuals(Vec::Zero(3), ball, cube);
  CHECK(r0.size() == 6);
  for (int i = 0; i < 6; ++i) CHECK(r0(i) == doctest::Approx(0.5).epsilon(1e-14));
  const Vec r1 = corridor_residuals(vec({0.6, 0, 0}), ball, cube);
  CHECK(r1(0) == doctest::Approx(-0.1).epsilon(1e-12));  // +x face
  CHECK(r1(1) == doctest::Approx(1.1).epsilon(1e-12));   // -x face
  CHECK(cube.chebyshev_radius() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cube.chebyshev_center().norm() < 1e-12);
}

TEST_CASE("rows are normalised at construction") {
  Mat a(3, 2);
  a << 3, 0, 0, -2, -1, 1;
  const Polyhedron p(a, vec({3.0, 2.0, 1.0}));
  for (int i = 0; i < p.rows(); ++i) CHECK(std::abs(p.a().row(i).norm() - 1.0) < 1e-10);
  CHECK(p.b()(0) == doctest::Approx(1.0));
  CHECK(p.b()(1) == doctest::Approx(1.0));
  CHECK(p.contains(vec({0.0, 0.0})));
  CHECK_FALSE(p.contains(vec({1.5, 0.0})));
}

TEST_CASE("invalid polyhedra are rejected") {
  Mat a(2, 2);
  a << 1, 0, -1, 0;
  CHECK(kind_of([&] { Polyhedron(a, vec({-1.0, -1.0})); }) == ErrorKind::kInfeasible);
  CHECK(kind_of([&] { Polyhedron(a, vec({1.0})); }) == ErrorKind::kDimensionMismatch);
  Mat z = Mat::Zero(1, 2);
  CHECK(kind_of([&] { Polyhedron(z, vec({1.0})); }) == ErrorKind::kInvalidInput);
  const Polyhedron sq = Polyhedron::box(vec({0, 0}), vec({1, 1}));
  CHECK(kind_of([&] { corridor_residuals(Vec::Zero(3), Ellipsoid(Mat::Identity(3, 3)), sq); }) ==
        ErrorKind::kDimensionMismatch);
}

TEST_CASE("residual equals the support-point distance and shrinks monotonically") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int d = 2 + t % 2;
    const Polyhedron poly = random_polyhedron(rng, d);
    const Ellipsoid qa(oracle::random_spd(rng, d, 0.01, 1.0));
    Vec c(d);
    for (int k = 0; k < d; ++k) c(k) = u(rng);
    const Vec r = corridor_residuals(c, qa, poly);
    for (int i = 0; i < poly.rows(); ++i) {
      const Vec z = support_point(qa, c, poly.a().row(i).transpose());
      CHECK(std::abs(r(i) - (poly.b()(i) - poly.a().row(i).dot(z))) < 1e-10);
    }
    const Vec smaller = corridor_residuals(c, qa.scaled(0.7), poly);
    CHECK((smaller - r).minCoeff() >= 0.0);
  }
}

TEST_CASE("residual signs agree with boundary sampling") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int checked = 0;
  for (int t = 0; t < 300; ++t) {
    const int d = 2 + t % 2;
    const Polyhedron poly = random_polyhedron(rng, d);
    const Ellipsoid qa(oracle::random_spd(rng, d, 0.05, 2.0));
    Vec c(d);
    for (int k = 0; k < d; ++k) c(k) = u(rng);
    const Vec r = corridor_residuals(c, qa, poly);
    Vec worst = Vec::Constant(poly.rows(), -1e300);  // max_i over samples of A_i x - b_i
    for (int s = 0; s < 3000; ++s) {
      const Vec x = c + oracle::boundary_point(qa.shape(), oracle::unit_direction(rng, d));
      worst = worst.cwiseMax(poly.a() * x - poly.b());
    }
    for (int i = 0; i < poly.rows(); ++i) {
      const double reach = std::sqrt(poly.a().row(i) * qa.shape() * poly.a().row(i).transpose());
      if (r(i) >= 0.0) {
        CHECK(worst(i) <= 1e-12);  // no sample crosses a satisfied face
      } else if (r(i) < -0.05 * reach) {
        CHECK(worst(i) > 0.0);  // a clear violation is seen by sampling
        ++checked;
      }
    }
  }
  CHECK(checked > 50);
}

TEST_CASE("polyhedron assignment") {
  const std::vector<Polyhedron> single{Polyhedron::box(vec({-10, -10}), vec({10, 10}))};
  std::vector<Vec> line;
  for (int t = 0; t <= 20; ++t) line.push_back(vec({-5.0 + 0.5 * t, 0.0}));
  for (int idx : assign_polyhedra(line, single)) CHECK(idx == 0);

  // Boxes overlap on x in [-1, 1]; the wider margin flips at x = 0.
  const std::vector<Polyhedron> two{Polyhedron::box(vec({-6, -2}), vec({1, 2})),
                                    Polyhedron::box(vec({-1, -2}), vec({6, 2}))};
  const std::vector<int> idx = assign_polyhedra(line, two);
  int switches = 0;
  for (size_t t = 1; t < idx.size(); ++t) switches += idx[t] != idx[t - 1];
  CHECK(switches == 1);
  CHECK(idx.front() == 0);
  CHECK(idx.back() == 1);
  CHECK(idx[10] == 0);  // x = 0: equal margins, lowest index wins
  CHECK(idx[11] == 1);

  CHECK(kind_of([&] { assign_polyhedra({vec({20.0, 0.0})}, two); }) == ErrorKind::kInfeasible);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::vector<Polyhedron> corridor;
  for (int k = 0; k < 5; ++k) corridor.push_back(random_polyhedron(rng, 3));
  std::vector<Vec> pts;
  for (int k = 0; k < 200; ++k) pts.push_back(vec({0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng)}));
  const std::vector<int> assigned = assign_polyhedra(pts, corridor);
  for (size_t k = 0; k < pts.size(); ++k) {
    CHECK(corridor[assigned[k]].margin(pts[k]) >= 0.0);
    for (size_t j = 0; j < corridor.size(); ++j) {
      CHECK(corridor[j].margin(pts[k]) <= corridor[assigned[k]].margin(pts[k]));
    }
  }
}
