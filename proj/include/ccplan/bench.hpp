#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ccplan/ellipsoid.hpp"
#include "ccplan/estimators.hpp"

namespace ccplan {

/// One randomly generated estimator benchmark case: an axis-aligned robot
/// ellipsoid at the origin, a randomly oriented obstacle ellipsoid whose
/// mean is uniform in [-2, 2]^3, and both positions uncertain with
/// independent per-axis variances in [0.01, 2] (the relative covariance is
/// their sum). Semi-axes are uniform in [0.2, 2].
struct BenchInstance {
  Ellipsoid robot;
  Ellipsoid obstacle;
  GaussianState rel;  ///< obstacle position relative to the robot
  Ellipsoid region;   ///< outer Minkowski bound robot (+) obstacle
};

/// Deterministic in (seed, index); independent of evaluation order.
BenchInstance table1_instance(std::uint64_t seed, long index);

/// Monte Carlo of the true collision probability: the fraction of sampled
/// relative positions at which the two fixed-orientation shapes overlap.
McEstimate true_overlap_mc(const BenchInstance& inst, long samples, std::uint64_t seed);

/// Estimator columns, in output order.
enum Estimator { kExact, kGh200, kGh10, kCenter, kLinearized, kNumEstimators };
const char* estimator_name(int e);

struct BenchCase {
  long index = 0;
  double truth = 0.0;           ///< true-overlap oracle
  double truth_half_width = 0.0;
  double estimate[kNumEstimators] = {};
  double seconds[kNumEstimators] = {};  ///< wall clock, excluded from CSV output
};

BenchCase evaluate_case(const BenchInstance& inst, long index, long oracle_samples,
                        std::uint64_t oracle_seed);

struct BenchConfig {
  long cases = 10000;
  std::uint64_t seed = 1;
  long oracle_samples = 100000;
  int threads = 1;
};

struct EstimatorStats {
  double mean_error = 0.0;  ///< estimate - truth
  double std_error = 0.0;
  double mean_abs_error = 0.0;
  double std_abs_error = 0.0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
};

struct BenchReport {
  BenchConfig config;
  std::vector<BenchCase> cases;
  EstimatorStats stats[kNumEstimators];
};

/// Evaluates every case (in parallel when threads > 1; results are
/// independent of the thread count) and aggregates the statistics.
BenchReport run_bench(const BenchConfig& config);

/// Summary CSV: one row per estimator with the error statistics. Timing is
/// left out so the file is bit-identical across runs.
void write_bench_summary_csv(std::ostream& out, const BenchReport& report);

/// Per-case CSV: index, truth, its half width and every estimate.
void write_bench_cases_csv(std::ostream& out, const BenchReport& report);

/// Human-readable table including the timing columns.
void print_bench_table(std::ostream& out, const BenchReport& report);

/// Paired z statistic of mean(|err_b|) - mean(|err_a|) over the cases:
/// large positive values mean estimator a is more accurate than b.
double paired_abs_error_z(const BenchReport& report, int a, int b);

}  // namespace ccplan
