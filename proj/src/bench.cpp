#include "ccplan/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "ccplan/error.hpp"
#include "ccplan/gauss_hermite.hpp"
#include "ccplan/quadform_cdf.hpp"
#include "ccplan/rng.hpp"

namespace ccplan {

namespace {

// Stream identifiers for the per-case derived seeds.
constexpr std::uint64_t kInstanceStream = 1;
constexpr std::uint64_t kOracleStream = 2;

Eigen::Matrix3d random_rotation(CounterRng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

double linearized_or_one(const GaussianState& rel, const Ellipsoid& qc) {
  try {
    return collision_prob_linearized(rel, qc);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kZeroDirection) return 1.0;
    throw;
  }
}

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

// Round-trip precision keeps the CSV exact while staying portable text.
std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

const char* estimator_name(int e) {
  switch (e) {
    case kExact: return "exact";
    case kGh200: return "gh200";
    case kGh10: return "gh10";
    case kCenter: return "center_point";
    case kLinearized: return "linearized";
    default: return "unknown";
  }
}

BenchInstance table1_instance(std::uint64_t seed, long index) {
  CounterRng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(index)), kInstanceStream));
  Vec robot_axes(3), obstacle_axes(3), mean(3), var(3);
  for (int i = 0; i < 3; ++i) robot_axes(i) = rng.uniform(0.2, 2.0);
  for (int i = 0; i < 3; ++i) obstacle_axes(i) = rng.uniform(0.2, 2.0);
  const Mat rot = random_rotation(rng);
  for (int i = 0; i < 3; ++i) mean(i) = rng.uniform(-2.0, 2.0);
  // Both positions are uncertain; the relative covariance is their sum.
  for (int i = 0; i < 3; ++i) var(i) = rng.uniform(0.01, 2.0) + rng.uniform(0.01, 2.0);

  const Ellipsoid robot = Ellipsoid::from_semi_axes(robot_axes);
  const Ellipsoid obstacle = Ellipsoid::from_semi_axes(obstacle_axes, rot);
  return {robot, obstacle, GaussianState{mean, var.asDiagonal()}, minkowski_outer(robot, obstacle)};
}

McEstimate true_overlap_mc(const BenchInstance& inst, long samples, std::uint64_t seed) {
  if (samples < 1000) throw Error(ErrorKind::kOutOfRange, "Monte Carlo needs >= 1000 samples");
  const MinkowskiSumTest sum(inst.robot, inst.obstacle);
  const Eigen::LLT<Mat> llt(inst.rel.cov);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::kNotPositiveDefinite, "oracle covariance");
  const Mat l = llt.matrixL();
  const int d = sum.dim();
  long hits = 0;
  for (long c = 0; c * kMcChunk < samples; ++c) {
    CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    const long end = std::min(samples, (c + 1) * kMcChunk);
    for (long s = c * kMcChunk; s < end; ++s) {
      double z[3], p[3];
      for (int i = 0; i < d; ++i) z[i] = rng.normal();
      for (int i = 0; i < d; ++i) {
        double v = inst.rel.mean(i);
        for (int j = 0; j <= i; ++j) v += l(i, j) * z[j];
        p[i] = v;
      }
      hits += sum.contains(p);
    }
  }
  McEstimate out;
  out.samples = samples;
  out.seed = seed;
  out.value = static_cast<double>(hits) / static_cast<double>(samples);
  out.half_width_3sigma = 3.0 * std::sqrt(out.value * (1.0 - out.value) / static_cast<double>(samples));
  return out;
}

BenchCase evaluate_case(const BenchInstance& inst, long index, long oracle_samples,
                        std::uint64_t oracle_seed) {
  using clock = std::chrono::steady_clock;
  BenchCase c;
  c.index = index;
  const McEstimate truth = true_overlap_mc(inst, oracle_samples, oracle_seed);
  c.truth = truth.value;
  c.truth_half_width = truth.half_width_3sigma;
  auto timed = [&](int e, auto&& fn) {
    const auto t0 = clock::now();
    c.estimate[e] = fn();
    c.seconds[e] = std::chrono::duration<double>(clock::now() - t0).count();
  };
  timed(kExact, [&] { return collision_prob_exact(inst.rel, inst.region); });
  timed(kGh200, [&] { return collision_prob_gh(inst.rel, inst.region, 200); });
  timed(kGh10, [&] { return collision_prob_gh(inst.rel, inst.region, 10); });
  timed(kCenter, [&] { return collision_prob_center(inst.rel, inst.region); });
  timed(kLinearized, [&] { return linearized_or_one(inst.rel, inst.region); });
  return c;
}

BenchReport run_bench(const BenchConfig& config) {
  if (config.cases < 1) throw Error(ErrorKind::kOutOfRange, "bench needs at least one case");
  BenchReport report;
  report.config = config;
  report.cases.resize(static_cast<size_t>(config.cases));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < config.cases; i = next++) {
      const BenchInstance inst = table1_instance(config.seed, i);
      const std::uint64_t oracle_seed =
          derive_seed(derive_seed(config.seed, static_cast<std::uint64_t>(i)), kOracleStream);
      report.cases[static_cast<size_t>(i)] = evaluate_case(inst, i, config.oracle_samples, oracle_seed);
    }
  };
  const int threads = std::max(1, config.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (int e = 0; e < kNumEstimators; ++e) {
    std::vector<double> err, abs_err, secs;
    for (const BenchCase& c : report.cases) {
      err.push_back(c.estimate[e] - c.truth);
      abs_err.push_back(std::abs(c.estimate[e] - c.truth));
      secs.push_back(c.seconds[e]);
    }
    EstimatorStats& s = report.stats[e];
    mean_std(err, s.mean_error, s.std_error);
    mean_std(abs_err, s.mean_abs_error, s.std_abs_error);
    mean_std(secs, s.mean_seconds, s.std_seconds);
  }
  return report;
}

void write_bench_summary_csv(std::ostream& out, const BenchReport& report) {
  out << "estimator,cases,oracle_samples,seed,mean_error,std_error,mean_abs_error,std_abs_error\n";
  for (int e = 0; e < kNumEstimators; ++e) {
    const EstimatorStats& s = report.stats[e];
    out << estimator_name(e) << ',' << report.config.cases << ',' << report.config.oracle_samples << ','
        << report.config.seed << ',' << num(s.mean_error) << ',' << num(s.std_error) << ','
        << num(s.mean_abs_error) << ',' << num(s.std_abs_error) << '\n';
  }
}

void write_bench_cases_csv(std::ostream& out, const BenchReport& report) {
  out << "index,truth,truth_half_width_3sigma";
  for (int e = 0; e < kNumEstimators; ++e) out << ',' << estimator_name(e);
  out << '\n';
  for (const BenchCase& c : report.cases) {
    out << c.index << ',' << num(c.truth) << ',' << num(c.truth_half_width);
    for (int e = 0; e < kNumEstimators; ++e) out << ',' << num(c.estimate[e]);
    out << '\n';
  }
}

void print_bench_table(std::ostream& out, const BenchReport& report) {
  out << "cases " << report.config.cases << ", oracle samples " << report.config.oracle_samples
      << ", seed " << report.config.seed << '\n';
  out << std::left << std::setw(14) << "estimator" << std::right << std::setw(24) << "error (mean +- std)"
      << std::setw(24) << "|error| (mean +- std)" << std::setw(26) << "time s (mean +- std)" << '\n';
  out << std::fixed;
  for (int e = 0; e < kNumEstimators; ++e) {
    const EstimatorStats& s = report.stats[e];
    std::ostringstream a, b, c;
    a << std::fixed << std::setprecision(4) << s.mean_error << " +- " << s.std_error;
    b << std::fixed << std::setprecision(4) << s.mean_abs_error << " +- " << s.std_abs_error;
    c << std::scientific << std::setprecision(2) << s.mean_seconds << " +- " << s.std_seconds;
    out << std::left << std::setw(14) << estimator_name(e) << std::right << std::setw(24) << a.str()
        << std::setw(24) << b.str() << std::setw(26) << c.str() << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

double paired_abs_error_z(const BenchReport& report, int a, int b) {
  std::vector<double> diff;
  for (const BenchCase& c : report.cases) {
    diff.push_back(std::abs(c.estimate[b] - c.truth) - std::abs(c.estimate[a] - c.truth));
  }
  double mean = 0.0, sd = 0.0;
  mean_std(diff, mean, sd);
  if (sd == 0.0) return mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return mean / (sd / std::sqrt(static_cast<double>(diff.size())));
}

}  // namespace ccplan
