#include "ccplan/harness.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ccplan/error.hpp"
#include "ccplan/estimators.hpp"
#include "ccplan/gauss_hermite.hpp"
#include "ccplan/quadform_cdf.hpp"

#ifndef CCPLAN_SCENARIO_DIR
#define CCPLAN_SCENARIO_DIR "scenarios"
#endif

namespace ccplan {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat_json(const Mat& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kInvalidInput, "cannot write '" + path.string() + "'");
  return f;
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInfeasible:
    case ErrorKind::kNonConvergence:
      return kExitNotConverged;
    default:
      return kExitInvalidInput;
  }
}

std::filesystem::path bundled_scenario_dir() {
  if (const char* env = std::getenv("CCPLAN_SCENARIO_DIR")) return env;
  return CCPLAN_SCENARIO_DIR;
}

std::filesystem::path resolve_scenario(const std::string& name_or_path) {
  const std::filesystem::path direct(name_or_path);
  if (std::filesystem::exists(direct)) return direct;
  const std::filesystem::path bundled = bundled_scenario_dir() / (name_or_path + ".json");
  if (std::filesystem::exists(bundled)) return bundled;
  throw Error(ErrorKind::kInvalidInput, "no scenario file or bundled scenario named '" + name_or_path + "'");
}

PlanOutput run_plan(const Scenario& s, bool use_primitives) {
  const auto t0 = std::chrono::steady_clock::now();
  const WorldBelief belief = initial_belief(s);
  PlanOutput out;
  if (use_primitives) {
    Scenario open_space = s;
    open_space.corridor.clear();
    PrimitiveOptions popt;
    popt.budget = s.simulation.primitive_budget;
    popt.primitive_steps = s.simulation.primitive_steps;
    if (s.robot.max_speed) popt.max_speed = *s.robot.max_speed;
    out.reference = generate_reference(make_problem(open_space, belief),
                                       std::min(s.risk.total / s.horizon.steps, kMaxStepAllocation),
                                       s.corridor, popt);
    out.problem = make_problem(s, belief, &out.reference->positions);
  } else {
    out.problem = make_problem(s, belief);
  }
  out.result = iter_traj_opt(out.problem, s.risk.total, s.risk.precision, iter_options(s));
  out.risk = trajectory_risk(out.result.trajectory, out.problem);
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_plan_outputs(const Scenario& s, const PlanOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Trajectory& t = out.result.trajectory;
  const IterTrace& trace = out.result.trace;

  json traj;
  traj["scenario"] = s.name;
  traj["steps"] = out.problem.steps;
  traj["dt"] = out.problem.dt;
  traj["total_risk_budget"] = s.risk.total;
  json states = json::array(), controls = json::array();
  for (const Vec& x : t.states) states.push_back(vec_json(x));
  for (const Vec& u : t.controls) controls.push_back(vec_json(u));
  traj["states"] = states;
  traj["controls"] = controls;
  traj["objective"] = t.objective;
  traj["max_violation"] = t.max_violation;
  traj["risk"] = {{"per_step", out.risk.per_step},
                  {"total", out.risk.total},
                  {"per_obstacle_max", out.risk.per_obstacle_max},
                  {"worst_obstacle", out.risk.worst_obstacle}};
  json iters = json::array();
  for (const IterRecord& r : trace.iterations) {
    iters.push_back({{"allocated", r.allocated},
                     {"achieved", r.achieved},
                     {"objective", r.objective},
                     {"solver_converged", r.solver_converged},
                     {"feasible", r.feasible}});
  }
  traj["trace"] = {{"relaxed_risk", trace.relaxed_risk},
                   {"iterations", iters},
                   {"converged", trace.converged},
                   {"timed_out", trace.timed_out}};
  if (out.reference) {
    json ref = json::array();
    for (const Vec& p : out.reference->positions) ref.push_back(vec_json(p));
    traj["reference"] = {{"positions", ref},
                         {"degraded", out.reference->degraded},
                         {"expansions", out.reference->expansions}};
  }
  open_out(dir / "trajectory.json") << traj.dump(2) << '\n';

  const int np = out.problem.position_dim();
  std::ofstream csv = open_out(dir / "trajectory.csv");
  csv << "knot,time";
  for (int i = 0; i < np; ++i) csv << ",p" << i;
  for (int i = 0; i < np; ++i) csv << ",ref" << i;
  csv << ",risk\n";
  for (int k = 0; k < out.problem.steps; ++k) {
    csv << k << ',' << num(k * out.problem.dt);
    for (int i = 0; i < np; ++i) csv << ',' << num(t.states[k](i));
    const Vec r = out.problem.reference_at(k);
    for (int i = 0; i < np; ++i) csv << ',' << num(r(i));
    csv << ',' << num(out.risk.per_step[k]) << '\n';
  }

  std::ofstream tcsv = open_out(dir / "trace.csv");
  tcsv << "iteration,allocated,achieved,objective,solver_converged,feasible\n";
  for (size_t k = 0; k < trace.iterations.size(); ++k) {
    const IterRecord& r = trace.iterations[k];
    tcsv << k + 1 << ',' << num(r.allocated) << ',' << num(r.achieved) << ',' << num(r.objective) << ','
         << r.solver_converged << ',' << r.feasible << '\n';
  }
}

std::vector<EstimateRow> run_estimate(const GaussianState& rel, const Ellipsoid& region, int gh_order,
                                      long mc_samples, std::uint64_t seed) {
  validate(rel);
  if (rel.mean.size() != region.dim()) throw Error(ErrorKind::kDimensionMismatch, "mean and region differ in size");
  using clock = std::chrono::steady_clock;
  std::vector<EstimateRow> rows;
  auto timed = [&](const std::string& name, auto&& fn) {
    const auto t0 = clock::now();
    EstimateRow r;
    r.estimator = name;
    r.value = fn(r);
    r.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    rows.push_back(r);
  };
  timed("exact", [&](EstimateRow&) { return collision_prob_exact(rel, region); });
  timed("gh" + std::to_string(gh_order), [&](EstimateRow&) { return collision_prob_gh(rel, region, gh_order); });
  if (gh_order != 10) timed("gh10", [&](EstimateRow&) { return collision_prob_gh(rel, region, 10); });
  timed("linearized", [&](EstimateRow&) {
    try {
      return collision_prob_linearized(rel, region);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kZeroDirection) return 1.0;
      throw;
    }
  });
  timed("center_point", [&](EstimateRow&) { return collision_prob_center(rel, region); });
  if (mc_samples > 0) {
    timed("monte_carlo", [&](EstimateRow& r) {
      const McEstimate mc = collision_prob_mc(rel, region, mc_samples, seed);
      r.half_width_3sigma = mc.half_width_3sigma;
      return mc.value;
    });
  }
  return rows;
}

void print_estimate_table(std::ostream& out, const std::vector<EstimateRow>& rows) {
  out << std::left << std::setw(14) << "estimator" << std::right << std::setw(16) << "probability"
      << std::setw(14) << "+-3sigma" << std::setw(14) << "seconds" << '\n';
  for (const EstimateRow& r : rows) {
    std::ostringstream hw;
    if (r.estimator == "monte_carlo") hw << std::fixed << std::setprecision(6) << r.half_width_3sigma;
    out << std::left << std::setw(14) << r.estimator << std::right << std::setw(16) << std::fixed
        << std::setprecision(8) << r.value << std::setw(14) << hw.str() << std::setw(14) << std::scientific
        << std::setprecision(2) << r.seconds << '\n';
    out.unsetf(std::ios::floatfield);
  }
}

std::string estimate_json(const GaussianState& rel, const Ellipsoid& region,
                          const std::vector<EstimateRow>& rows, bool with_timing) {
  json j;
  j["mean"] = vec_json(rel.mean);
  j["cov"] = mat_json(rel.cov);
  j["region"] = mat_json(region.shape());
  json list = json::array();
  for (const EstimateRow& r : rows) {
    json e = {{"estimator", r.estimator}, {"value", r.value}};
    if (r.estimator == "monte_carlo") e["half_width_3sigma"] = r.half_width_3sigma;
    if (with_timing) e["seconds"] = r.seconds;
    list.push_back(e);
  }
  j["estimates"] = list;
  return j.dump(2) + "\n";
}

}  // namespace ccplan
