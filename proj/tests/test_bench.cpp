#include <doctest.h>

#include <sstream>

#include "ccplan/bench.hpp"
#include "ccplan/quadform_cdf.hpp"
#include "test_util.hpp"

using namespace ccplan;

namespace {

BenchConfig small(int threads) {
  BenchConfig c;
  c.cases = 100;
  c.seed = 5;
  c.oracle_samples = 20000;
  c.threads = threads;
  return c;
}

std::string csv(const BenchReport& r) {
  std::ostringstream out;
  write_bench_summary_csv(out, r);
  write_bench_cases_csv(out, r);
  return out.str();
}

}  // namespace

TEST_CASE("instances follow the generator ranges and depend only on (seed, index)") {
  for (long i = 0; i < 200; ++i) {
    const BenchInstance a = table1_instance(9, i);
    const BenchInstance b = table1_instance(9, i);
    CHECK(a.rel.mean == b.rel.mean);
    CHECK(a.obstacle.shape() == b.obstacle.shape());
    CHECK(a.rel.mean.cwiseAbs().maxCoeff() <= 2.0);
    const Vec var = a.rel.cov.diagonal();
    CHECK((var.array() >= 0.02).all());
    CHECK((var.array() <= 4.0).all());
    CHECK((a.rel.cov - Mat(var.asDiagonal())).norm() == 0.0);
    const Vec axes = a.robot.shape().diagonal().cwiseSqrt();
    CHECK((axes.array() >= 0.2).all());
    CHECK((axes.array() <= 2.0).all());
    const Vec obstacle_axes = sym_eigen(a.obstacle.shape()).values.cwiseSqrt();
    CHECK((obstacle_axes.array() >= 0.2 - 1e-12).all());
    CHECK((obstacle_axes.array() <= 2.0 + 1e-12).all());
  }
  CHECK(table1_instance(9, 3).rel.mean != table1_instance(10, 3).rel.mean);
}

TEST_CASE("outer-bound estimate dominates the true-overlap oracle") {
  // The region is an outer bound of the true collision set, so the exact
  // probability over it can only exceed the overlap frequency (up to MC noise).
  for (long i = 0; i < 50; ++i) {
    const BenchInstance inst = table1_instance(2, i);
    const McEstimate truth = true_overlap_mc(inst, 20000, 77);
    CHECK(collision_prob_exact(inst.rel, inst.region) >= truth.value - truth.half_width_3sigma - 1e-12);
  }
}

TEST_CASE("benchmark output is independent of the thread count") {
  const BenchReport one = run_bench(small(1));
  const BenchReport four = run_bench(small(4));
  CHECK(csv(one) == csv(four));
  CHECK(csv(one) == csv(run_bench(small(1))));
  REQUIRE(one.cases.size() == 100);
  for (const BenchCase& c : one.cases) {
    CHECK(c.estimate[kLinearized] >= c.estimate[kExact] - 1e-9);
  }
}

TEST_CASE("exact estimator error lies in the published band" * doctest::may_fail()) {
  BenchConfig c = small(4);
  c.cases = 1000;
  c.oracle_samples = 100000;
  const BenchReport r = run_bench(c);
  CHECK(r.stats[kExact].mean_abs_error >= 0.08);
  CHECK(r.stats[kExact].mean_abs_error <= 0.18);
}
