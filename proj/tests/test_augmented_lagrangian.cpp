#include <doctest.h>

#include <cmath>

#include "ccplan/augmented_lagrangian.hpp"
#include "test_util.hpp"

using namespace ccplan;
using testutil::vec;

TEST_CASE("unconstrained Rosenbrock") {
  NlpProblem p;
  p.num_vars = 2;
  p.objective = [](const Vec& x, Vec* g) {
    const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
    if (g) {
      (*g)(0) = -2.0 * a - 400.0 * x(0) * b;
      (*g)(1) = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  const NlpResult r = solve_augmented_lagrangian(p, vec({-1.2, 1.0}));
  CHECK(r.converged);
  CHECK((r.x - vec({1.0, 1.0})).norm() < 1e-6);
}

TEST_CASE("equality-constrained quadratic") {
  NlpProblem p;
  p.num_vars = 2;
  p.num_eq = 1;
  p.objective = [](const Vec& x, Vec* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  p.equalities = [](const Vec& x, Vec& c, Mat* j) {
    c(0) = x(0) + x(1) - 1.0;
    if (j) *j = Mat::Ones(1, 2);
  };
  p.objective_hessian = 2.0 * Mat::Identity(2, 2);
  const NlpResult r = solve_augmented_lagrangian(p, vec({3.0, -1.0}));
  CHECK(r.converged);
  CHECK(r.max_violation <= 1e-6);
  CHECK((r.x - vec({0.5, 0.5})).norm() < 1e-5);
}

TEST_CASE("inequality constraints: inside and outside a disc") {
  NlpProblem inside;
  inside.num_vars = 2;
  inside.num_ineq = 1;
  inside.objective = [](const Vec& x, Vec* g) {
    const Vec d = x - vec({2.0, 1.0});
    if (g) *g = 2.0 * d;
    return d.squaredNorm();
  };
  inside.inequalities = [](const Vec& x, Vec& c, Mat* j) {
    c(0) = 1.0 - x.squaredNorm();
    if (j) *j = -2.0 * x.transpose();
  };
  NlpResult r = solve_augmented_lagrangian(inside, vec({0.0, 0.0}));
  CHECK(r.converged);
  CHECK((r.x - vec({2.0, 1.0}) / std::sqrt(5.0)).norm() < 1e-5);

  // Nonconvex feasible set: stay outside the unit disc.
  NlpProblem outside = inside;
  outside.objective = [](const Vec& x, Vec* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  outside.inequalities = [](const Vec& x, Vec& c, Mat* j) {
    c(0) = x.squaredNorm() - 1.0;
    if (j) *j = 2.0 * x.transpose();
  };
  r = solve_augmented_lagrangian(outside, vec({0.3, 0.1}));
  CHECK(r.converged);
  CHECK(r.x.norm() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x(1) / r.x(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("Hock-Schittkowski 71") {
  // min x1 x4 (x1 + x2 + x3) + x3  s.t.  x1 x2 x3 x4 >= 25,  |x|^2 = 40,  1 <= x <= 5.
  NlpProblem p;
  p.num_vars = 4;
  p.num_eq = 1;
  p.num_ineq = 9;
  p.objective = [](const Vec& x, Vec* g) {
    if (g) {
      (*g)(0) = x(3) * (2 * x(0) + x(1) + x(2));
      (*g)(1) = x(0) * x(3);
      (*g)(2) = x(0) * x(3) + 1.0;
      (*g)(3) = x(0) * (x(0) + x(1) + x(2));
    }
    return x(0) * x(3) * (x(0) + x(1) + x(2)) + x(2);
  };
  p.equalities = [](const Vec& x, Vec& c, Mat* j) {
    c(0) = x.squaredNorm() - 40.0;
    if (j) *j = 2.0 * x.transpose();
  };
  p.inequalities = [](const Vec& x, Vec& c, Mat* j) {
    c(0) = x.prod() - 25.0;
    for (int i = 0; i < 4; ++i) {
      c(1 + 2 * i) = x(i) - 1.0;
      c(2 + 2 * i) = 5.0 - x(i);
    }
    if (j) {
      j->setZero();
      for (int i = 0; i < 4; ++i) {
        (*j)(0, i) = x.prod() / x(i);
        (*j)(1 + 2 * i, i) = 1.0;
        (*j)(2 + 2 * i, i) = -1.0;
      }
    }
  };
  // The textbook start (1, 5, 5, 1) sits on the bounds; with bounds treated
  // as ordinary penalised constraints the first weak-penalty pass can cross
  // x1 < 0 into an infeasible basin, so an interior start is used.
  NlpOptions opt;
  const NlpResult r = solve_augmented_lagrangian(p, vec({1.5, 4.5, 4.0, 1.5}), opt);
  CAPTURE(r.x.transpose());
  CAPTURE(r.outer_iterations);
  CAPTURE(r.stationarity);
  CHECK(r.converged);
  CHECK(r.objective == doctest::Approx(17.0140173).epsilon(1e-6));
  CHECK(r.max_violation <= 1e-6);
}

TEST_CASE("expired deadline returns the starting point flagged") {
  NlpProblem p;
  p.num_vars = 1;
  p.objective = [](const Vec& x, Vec* g) {
    if (g) (*g)(0) = 2.0 * (x(0) - 3.0);
    return (x(0) - 3.0) * (x(0) - 3.0);
  };
  NlpOptions opt;
  opt.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  const NlpResult r = solve_augmented_lagrangian(p, vec({0.0}), opt);
  CHECK(r.timed_out);
  CHECK_FALSE(r.converged);
  CHECK(r.x(0) == 0.0);
}
