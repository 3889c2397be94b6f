// Command-line front end: single-instance estimates, the estimator
// benchmark, one-horizon planning and the closed-loop simulation.

#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "ccplan/bench.hpp"
#include "ccplan/error.hpp"
#include "ccplan/harness.hpp"
#include "ccplan/simulation.hpp"

using namespace ccplan;

namespace {

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

struct EstimateArgs {
  std::vector<double> mean, cov, cov_diag, region_axes, robot_axes, obstacle_axes;
  int gh_order = 200;
  long mc_samples = 1000000;
  std::uint64_t seed = 1;
  std::optional<long> table1_index;
  std::uint64_t table1_seed = 1;
  std::string json_out;
  bool timing = false;
};

int cmd_estimate(const EstimateArgs& a) {
  GaussianState rel;
  std::optional<Ellipsoid> region;
  if (a.table1_index) {
    const BenchInstance inst = table1_instance(a.table1_seed, *a.table1_index);
    rel = inst.rel;
    region = inst.region;
  } else {
    if (a.mean.empty()) throw Error(ErrorKind::kInvalidInput, "--mean is required");
    const int d = static_cast<int>(a.mean.size());
    rel.mean = to_vec(a.mean);
    if (!a.cov.empty()) {
      if (a.cov.size() != static_cast<size_t>(d * d)) throw Error(ErrorKind::kInvalidInput, "--cov needs d*d entries");
      rel.cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.cov.data(), d, d);
    } else if (!a.cov_diag.empty()) {
      rel.cov = to_vec(a.cov_diag).asDiagonal();
    } else {
      throw Error(ErrorKind::kInvalidInput, "--cov or --cov-diag is required");
    }
    if (!a.region_axes.empty()) {
      region = Ellipsoid::from_semi_axes(to_vec(a.region_axes));
    } else if (!a.robot_axes.empty() && !a.obstacle_axes.empty()) {
      region = minkowski_outer(Ellipsoid::from_semi_axes(to_vec(a.robot_axes)),
                               Ellipsoid::from_semi_axes(to_vec(a.obstacle_axes)));
    } else {
      throw Error(ErrorKind::kInvalidInput, "--region-axes or both --robot-axes and --obstacle-axes are required");
    }
  }
  const auto rows = run_estimate(rel, *region, a.gh_order, a.mc_samples, a.seed);
  print_estimate_table(std::cout, rows);
  if (!a.json_out.empty()) {
    std::ofstream f(a.json_out);
    if (!f) throw Error(ErrorKind::kInvalidInput, "cannot write '" + a.json_out + "'");
    f << estimate_json(rel, *region, rows, a.timing);
  }
  return kExitOk;
}

struct BenchArgs {
  BenchConfig config;
  std::string out, cases_out;
};

int cmd_bench(BenchArgs a) {
  if (a.config.cases < 100) throw Error(ErrorKind::kInvalidInput, "--cases must be at least 100");
  if (a.config.threads <= 0) a.config.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const BenchReport report = run_bench(a.config);
  print_bench_table(std::cout, report);
  const int order[] = {kExact, kGh200, kGh10, kCenter, kLinearized};
  std::cout << "paired z of mean |error| gaps:";
  for (int i = 0; i + 1 < kNumEstimators; ++i) {
    std::cout << ' ' << estimator_name(order[i]) << '<' << estimator_name(order[i + 1]) << '='
              << paired_abs_error_z(report, order[i], order[i + 1]);
  }
  std::cout << '\n';
  if (!a.out.empty()) {
    std::ofstream f(a.out);
    if (!f) throw Error(ErrorKind::kInvalidInput, "cannot write '" + a.out + "'");
    write_bench_summary_csv(f, report);
  }
  if (!a.cases_out.empty()) {
    std::ofstream f(a.cases_out);
    if (!f) throw Error(ErrorKind::kInvalidInput, "cannot write '" + a.cases_out + "'");
    write_bench_cases_csv(f, report);
  }
  return kExitOk;
}

struct PlanArgs {
  std::string scenario, out;
  std::optional<double> total_risk;
  bool primitives = false;
};

int cmd_plan(const PlanArgs& a) {
  Scenario s = load_scenario(resolve_scenario(a.scenario).string());
  if (a.total_risk) {
    s.risk.total = *a.total_risk;
    validate_scenario(s);
  }
  const PlanOutput out = run_plan(s, a.primitives);
  write_plan_outputs(s, out, a.out);
  const IterTrace& trace = out.result.trace;
  std::cout << "scenario " << s.name << ": risk " << out.result.trajectory.total_risk << " (budget " << s.risk.total
            << "), relaxed risk " << trace.relaxed_risk << ", iterations " << trace.iterations.size()
            << ", objective " << out.result.trajectory.objective << ", " << (trace.converged ? "converged" : "NOT converged")
            << ", " << out.seconds << " s\n";
  return trace.converged ? kExitOk : kExitNotConverged;
}

struct SimArgs {
  std::string scenario, out;
  std::optional<double> duration, time_budget_ms;
  std::optional<std::uint64_t> seed;
  bool timings = false;
};

int cmd_simulate(const SimArgs& a) {
  const Scenario s = load_scenario(resolve_scenario(a.scenario).string());
  SimConfig c;
  c.duration = a.duration.value_or(s.simulation.duration);
  const auto it = s.seeds.find("simulation");
  c.seed = a.seed.value_or(it != s.seeds.end() ? it->second : 0);
  c.time_budget_ms = a.time_budget_ms;
  c.record_timing = a.timings;
  std::ofstream f;
  if (!a.out.empty()) {
    f.open(a.out);
    if (!f) throw Error(ErrorKind::kInvalidInput, "cannot write '" + a.out + "'");
  }
  std::ostream& log = a.out.empty() ? std::cout : f;
  const SimSummary r = simulate(s, c, log);
  std::cerr << "cycles " << r.cycles << ", collisions " << r.collisions << ", fallbacks " << r.fallback_cycles
            << ", degraded references " << r.degraded_references << ", min margin " << r.min_margin
            << ", final goal distance " << r.final_goal_distance << (r.success ? ", success" : ", FAILED") << '\n';
  return r.success ? kExitOk : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chance-constrained planning toolkit"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Every collision-probability estimator on one instance");
  e->add_option("--mean", est.mean, "Relative position mean")->delimiter(',');
  e->add_option("--cov", est.cov, "Relative covariance, row-major")->delimiter(',');
  e->add_option("--cov-diag", est.cov_diag, "Diagonal relative covariance")->delimiter(',');
  e->add_option("--region-axes", est.region_axes, "Collision-region semi-axes")->delimiter(',');
  e->add_option("--robot-axes", est.robot_axes, "Robot semi-axes (region = outer Minkowski bound)")->delimiter(',');
  e->add_option("--obstacle-axes", est.obstacle_axes, "Obstacle semi-axes")->delimiter(',');
  e->add_option("--gh-order", est.gh_order, "Gauss-Hermite nodes per axis")->check(CLI::Range(1, 400));
  e->add_option("--mc-samples", est.mc_samples, "Monte Carlo samples (0 skips)");
  e->add_option("--seed", est.seed, "Monte Carlo seed");
  e->add_option("--table1-index", est.table1_index, "Use benchmark instance INDEX instead of explicit values");
  e->add_option("--table1-seed", est.table1_seed, "Benchmark generator seed");
  e->add_option("--json", est.json_out, "Write a JSON record");
  e->add_flag("--timing", est.timing, "Include timings in the JSON record");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench-estimators", "Randomized estimator benchmark");
  b->add_option("--cases", bench.config.cases, "Number of random instances (>= 100)");
  b->add_option("--seed", bench.config.seed, "Generator seed");
  b->add_option("--out", bench.out, "Summary CSV");
  b->add_option("--cases-out", bench.cases_out, "Per-case CSV");
  b->add_option("--oracle-samples", bench.config.oracle_samples, "Monte Carlo samples per ground truth");
  b->add_option("--threads", bench.config.threads, "Worker threads (0 = all cores)");

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "One-horizon chance-constrained plan");
  p->add_option("--scenario", plan.scenario, "Scenario file or bundled name (scene1, scene2, ...)")->required();
  p->add_option("--out", plan.out, "Output directory")->required();
  p->add_option("--total-risk", plan.total_risk, "Override the total risk budget");
  p->add_flag("--primitives", plan.primitives, "Track a motion-primitive reference instead of the straight line");

  SimArgs sim;
  auto* s = app.add_subcommand("simulate", "Closed-loop receding-horizon simulation");
  s->add_option("--scenario", sim.scenario, "Scenario file or bundled name")->required();
  s->add_option("--duration", sim.duration, "Simulated seconds");
  s->add_option("--seed", sim.seed, "Noise seed");
  s->add_option("--out", sim.out, "JSON-lines output (stdout when absent)");
  s->add_option("--time-budget-ms", sim.time_budget_ms, "Per-cycle optimizer budget, 0 disables");
  s->add_flag("--timings", sim.timings, "Log planning wall-clock time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitInvalidInput;
  }

  try {
    if (e->parsed()) return cmd_estimate(est);
    if (b->parsed()) return cmd_bench(bench);
    if (p->parsed()) return cmd_plan(plan);
    if (s->parsed()) return cmd_simulate(sim);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return exit_code_for(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
